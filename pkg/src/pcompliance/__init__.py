"""Nonlinear compliance on grids with crack constraints.

The package solves p-Laplacian energy minimization on regular boxes,
measures variational capacities of small obstacles, estimates best
constants for pinned Poincare inequalities, and runs the crack-grid
construction whose dual flux vanishes as the grid refines.
"""

from .capacity import (
    CapacityResult,
    LogarithmicFit,
    RefinementRecord,
    ScalingFit,
    capacity_sweep,
    logarithmic_fit,
    point_capacity,
    refinement_ratio,
    scaling_fit,
    segment_box,
    segment_capacity,
    variational_capacity,
)
from .construction import (
    ConstructionParams,
    LocalSolveResult,
    VanishingRow,
    VanishingSequenceReport,
    assemble_flux,
    connected_baseline,
    crack_grid_construction,
    local_solve,
    vanishing_sequence_experiment,
)
from .errors import (
    ConfigError,
    DegenerateTarget,
    NonConvergence,
    ResolutionTooCoarse,
    ResolutionWarning,
    UnpinnedMask,
)
from .geometry import (
    ConstraintMask,
    CrackSet,
    GridDiscretization,
    ProblemSpec,
    Segment,
    axis_segment,
    build_grid,
    load_segments,
    rasterize,
    save_segments,
    total_length,
)
from .poincare import (
    PoincareResult,
    best_poincare_constant,
    crack_cube,
    crack_poincare,
)
from .solver import (
    ComplianceReport,
    DivergenceCheck,
    SolverConfig,
    cell_gradients,
    cell_means,
    divergence_residual,
    energy,
    energy_gradient,
    flux,
    flux_pnorm,
    gradient_pnorm,
    solve,
    solve_cracks,
)
from .sources import Constant, GaussianBump, GaussianSum, random_smooth, sample_on_grid
from .stability import (
    StabilityBound,
    StabilityRecord,
    check_stability,
    source_exponent,
    stability_experiment,
    truncation_bounds,
    z_modulus,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityResult",
    "ComplianceReport",
    "ConfigError",
    "Constant",
    "ConstraintMask",
    "ConstructionParams",
    "CrackSet",
    "DegenerateTarget",
    "DivergenceCheck",
    "GaussianBump",
    "GaussianSum",
    "GridDiscretization",
    "LocalSolveResult",
    "LogarithmicFit",
    "NonConvergence",
    "PoincareResult",
    "ProblemSpec",
    "RefinementRecord",
    "ResolutionTooCoarse",
    "ResolutionWarning",
    "ScalingFit",
    "Segment",
    "SolverConfig",
    "StabilityBound",
    "StabilityRecord",
    "UnpinnedMask",
    "VanishingRow",
    "VanishingSequenceReport",
    "assemble_flux",
    "axis_segment",
    "best_poincare_constant",
    "build_grid",
    "capacity_sweep",
    "cell_gradients",
    "cell_means",
    "check_stability",
    "connected_baseline",
    "crack_cube",
    "crack_grid_construction",
    "crack_poincare",
    "divergence_residual",
    "energy",
    "energy_gradient",
    "flux",
    "flux_pnorm",
    "gradient_pnorm",
    "load_segments",
    "local_solve",
    "logarithmic_fit",
    "point_capacity",
    "random_smooth",
    "rasterize",
    "refinement_ratio",
    "sample_on_grid",
    "save_segments",
    "scaling_fit",
    "segment_box",
    "segment_capacity",
    "solve",
    "solve_cracks",
    "source_exponent",
    "stability_experiment",
    "total_length",
    "truncation_bounds",
    "variational_capacity",
    "vanishing_sequence_experiment",
    "z_modulus",
]
