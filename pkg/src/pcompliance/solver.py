"""Discrete p-Dirichlet energy minimization on masked grids.

The energy of a node field u against a source f is

    E(u) = (1/p) int |grad u|^p dx - int f u dx

with gradients constant per cell (forward differences averaged over the
parallel edges of each cell), midpoint quadrature, and pinned nodes held at
exactly zero.  The admissible set is a linear subspace, the energy is
convex for every p > 1, and compliance is -E at the minimizer, which also
equals (1/p') int |grad u|^p and (1/p') int f u there.

For p < 2 the integrand is not C^1 where the gradient vanishes; the solver
minimizes the regularized density ((|grad u|^2 + eps^2)^(p/2))/p and the
report records the eps actually used.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import descent, quadratics
from .errors import NonConvergence, UnpinnedMask
from .geometry import ConstraintMask, CrackSet, GridDiscretization

# Node fields are plain arrays of shape grid.shape; flux fields are arrays
# of shape (dim, *grid.cells_shape), one vector per cell.
GridField = np.ndarray
FluxField = np.ndarray


@dataclass(frozen=True)
class SolverConfig:
    """Stopping and regularization knobs for the energy minimizer.

    grad_tolerance bounds the max-norm of the projected energy gradient at
    the returned field.  regularization_eps = None picks 0 for p >= 2 and
    1e-8 * max|f| otherwise; an explicit 0 is rejected for p < 2.  method
    is "auto" (linear algebra for p = 2, descent otherwise), "descent", or
    "linear".
    """

    grad_tolerance: float = 1e-8
    max_iterations: int = 50_000
    regularization_eps: Optional[float] = None
    method: str = "auto"
    memory: int = 12
    armijo_factor: float = 0.5
    armijo_c1: float = 1e-4
    prefer_direct: Optional[bool] = None

    def __post_init__(self):
        if not (self.grad_tolerance > 0):
            raise ValueError(f"grad_tolerance must be positive, got {self.grad_tolerance}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.regularization_eps is not None and self.regularization_eps < 0:
            raise ValueError("regularization_eps must be >= 0")
        if self.method not in ("auto", "descent", "linear"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (0 < self.armijo_factor < 1):
            raise ValueError("armijo_factor must lie in (0, 1)")

    def resolve_eps(self, p: float, f_scale: float) -> float:
        if self.regularization_eps is None:
            return 0.0 if p >= 2 else 1e-8 * max(f_scale, 1.0)
        if self.regularization_eps == 0.0 and p < 2:
            raise ValueError("regularization_eps = 0 is only valid for p >= 2")
        return self.regularization_eps


@dataclass(frozen=True)
class ComplianceReport:
    p: float
    energy: float
    compliance_energy_form: float
    compliance_work_form: float
    flux_pnorm: float
    crack_length: float
    penalized_objective: float
    iterations: int
    residual: float
    regularization_eps: float
    method: str
    evaluations: int = 0


@lru_cache(maxsize=None)
def _corners(dim: int):
    """Corner parities of a cell with the node slices selecting them."""
    table = []
    for bits in itertools.product((0, 1), repeat=dim):
        slices = tuple(slice(1, None) if b else slice(None, -1) for b in bits)
        table.append((bits, slices))
    return tuple(table)


@lru_cache(maxsize=None)
def _kernel_parities(dim: int) -> tuple[tuple[int, ...], ...]:
    """Sign-pattern exponents spanning the zero-energy modes of the stencil.

    The averaged-edge gradient annihilates every character (-1)^(b.index)
    whose support touches at least two axes, and the constant field; these
    also have zero cell means except the constant.
    """
    return tuple(b for b in itertools.product((0, 1), repeat=dim) if sum(b) >= 2)


def _characters_at(pins: np.ndarray, parities) -> np.ndarray:
    cols = [(-1.0) ** (pins @ np.asarray(b)) for b in parities]
    return np.column_stack(cols) if cols else np.zeros((len(pins), 0))


def zero_energy_unbounded(pinned: np.ndarray) -> bool:
    """True when some zero-energy mode with nonzero mean clears the pins.

    Such a mode makes the source term unbounded below for generic f, so
    free-boundary solves must reject these masks up front.
    """
    pins = np.argwhere(pinned)
    if len(pins) == 0:
        return True
    chars = _characters_at(pins, _kernel_parities(pinned.ndim))
    if chars.shape[1] == 0:
        return False
    coeff, *_ = np.linalg.lstsq(chars, -np.ones(len(pins)), rcond=None)
    return bool(np.abs(chars @ coeff + 1.0).max() < 1e-9)


def zero_energy_gauge_free(pinned: np.ndarray) -> bool:
    """True when no zero-energy mode at all survives the pins.

    Guarantees the pinned p = 2 stiffness block is nonsingular, which the
    direct linear paths require.
    """
    pins = np.argwhere(pinned)
    if len(pins) == 0:
        return False
    parities = _kernel_parities(pinned.ndim)
    chars = np.column_stack([np.ones(len(pins)),
                             _characters_at(pins, parities)])
    return int(np.linalg.matrix_rank(chars, tol=1e-9)) == chars.shape[1]


def cell_means(values: np.ndarray) -> np.ndarray:
    acc = None
    for _, sl in _corners(values.ndim):
        acc = values[sl].copy() if acc is None else acc + values[sl]
    return acc / 2 ** values.ndim


def cell_gradients(values: np.ndarray, h: float) -> np.ndarray:
    """Per-cell gradient vectors, shape (dim, *cells)."""
    dim = values.ndim
    out = np.zeros((dim,) + tuple(s - 1 for s in values.shape))
    for bits, sl in _corners(dim):
        v = values[sl]
        for k in range(dim):
            if bits[k]:
                out[k] += v
            else:
                out[k] -= v
    out /= 2 ** (dim - 1) * h
    return out


def _weights(s: np.ndarray, p: float) -> np.ndarray:
    """(s)^((p-2)/2) with the continuous extension 0 at s = 0 for p < 2."""
    if p == 2.0:
        return np.ones_like(s)
    if p > 2.0:
        return s ** ((p - 2.0) / 2.0)
    return np.where(s > 0.0, s, 1.0) ** ((p - 2.0) / 2.0) * (s > 0.0)


def energy(u: GridField, f: np.ndarray, grid: GridDiscretization, p: float,
           eps: float = 0.0) -> float:
    if u.shape != grid.shape or f.shape != grid.shape:
        raise ValueError(f"field shape {u.shape} / {f.shape} does not match grid {grid.shape}")
    g = cell_gradients(u, grid.h)
    s = (g * g).sum(axis=0) + eps * eps
    dirichlet = float(np.sum(s ** (p / 2.0))) / p
    work = float(np.dot(cell_means(f).ravel(), cell_means(u).ravel()))
    return grid.cell_volume * (dirichlet - work)


def energy_and_gradient(u: GridField, f_bar: np.ndarray, grid: GridDiscretization,
                        pinned: np.ndarray, p: float, eps: float) -> tuple[float, np.ndarray]:
    """Energy value and its projected node gradient, one fused pass.

    f_bar holds cell means of the source.  The gradient is exact for the
    discrete energy; entries at pinned nodes are forced to 0.
    """
    h = grid.h
    dim = grid.dim
    g = cell_gradients(u, h)
    s = (g * g).sum(axis=0) + eps * eps
    u_bar = cell_means(u)
    vol = grid.cell_volume
    value = vol * (float(np.sum(s ** (p / 2.0))) / p
                   - float(np.dot(f_bar.ravel(), u_bar.ravel())))
    wg = _weights(s, p) * g
    grad = np.zeros_like(u)
    gscale = vol / (2 ** (dim - 1) * h)
    mscale = vol / 2 ** dim
    for bits, sl in _corners(dim):
        contrib = -mscale * f_bar
        for k in range(dim):
            if bits[k]:
                contrib = contrib + gscale * wg[k]
            else:
                contrib = contrib - gscale * wg[k]
        grad[sl] += contrib
    grad[pinned] = 0.0
    return value, grad


def energy_gradient(u: GridField, f: np.ndarray, grid: GridDiscretization,
                    mask: ConstraintMask, p: float, eps: float = 0.0) -> GridField:
    _, grad = energy_and_gradient(u, cell_means(f), grid, mask.pinned, p, eps)
    return grad


def gradient_pnorm(u: GridField, grid: GridDiscretization, p: float) -> float:
    """int |grad u|^p by midpoint quadrature."""
    g = cell_gradients(u, grid.h)
    s = (g * g).sum(axis=0)
    return grid.cell_volume * float(np.sum(s ** (p / 2.0)))


def work_integral(u: GridField, f: np.ndarray, grid: GridDiscretization) -> float:
    """int f u by midpoint quadrature."""
    return grid.cell_volume * float(
        np.dot(cell_means(f).ravel(), cell_means(u).ravel()))


def flux(u: GridField, grid: GridDiscretization, p: float, eps: float = 0.0) -> FluxField:
    """Per-cell dual field |grad u|^(p-2) grad u (eps-regularized)."""
    g = cell_gradients(u, grid.h)
    s = (g * g).sum(axis=0) + eps * eps
    return _weights(s, p) * g


def flux_pnorm(sigma: FluxField, grid: GridDiscretization, p: float) -> float:
    """int |sigma|^p' by midpoint quadrature, p' the dual exponent."""
    q = p / (p - 1.0)
    s = (sigma * sigma).sum(axis=0)
    return grid.cell_volume * float(np.sum(s ** (q / 2.0)))


def solve(f: np.ndarray, grid: GridDiscretization, mask: ConstraintMask, p: float,
          config: Optional[SolverConfig] = None, *, crack_length: float = 0.0,
          length_penalty: float = 0.0, require_boundary: bool = True,
          ) -> tuple[GridField, ComplianceReport]:
    """Minimize the energy over fields vanishing on the mask.

    Returns the minimizer and a filled ComplianceReport.  Raises
    NonConvergence (with the partial report attached) when the iteration
    budget runs out above tolerance.
    """
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if config is None:
        config = SolverConfig()
    if f.shape != grid.shape:
        raise ValueError(f"source shape {f.shape} does not match grid {grid.shape}")
    if mask.grid != grid:
        raise ValueError("mask was built for a different grid")
    if require_boundary and not mask.pinned[grid.boundary_mask()].all():
        raise ValueError("mask must pin the whole outer boundary")
    if not require_boundary and zero_energy_unbounded(mask.pinned):
        raise UnpinnedMask(
            "the pins admit a zero-energy mode with nonzero mean, so the "
            "energy is unbounded below; widen the crack or refine the grid")

    eps = config.resolve_eps(p, float(np.abs(f).max(initial=0.0)))
    f_bar = cell_means(f)
    pinned = mask.pinned

    method = config.method
    if method == "auto":
        method = "linear" if p == 2.0 else "descent"
    if method == "linear" and p != 2.0:
        raise ValueError("the linear path only applies to p = 2")
    if (method == "linear" and not require_boundary
            and not zero_energy_gauge_free(pinned)):
        # pinned stiffness block is singular (pure-gauge modes); splu/CG
        # would misbehave, descent is immune
        method = "descent"

    if method == "linear":
        stiffness = quadratics.stiffness_matrix(grid)
        rhs = quadratics.mass_matrix(grid) @ f.ravel()
        u_flat, iterations = quadratics.solve_pinned(
            stiffness, rhs, pinned.ravel(),
            grad_tolerance=config.grad_tolerance,
            prefer_direct=config.prefer_direct)
        u = u_flat.reshape(grid.shape)
        evaluations = 0
    else:
        shape = grid.shape

        def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
            value, grad = energy_and_gradient(
                x.reshape(shape), f_bar, grid, pinned, p, eps)
            return value, grad.ravel()

        result = descent.minimize(
            objective, np.zeros(grid.n_nodes),
            grad_tolerance=config.grad_tolerance,
            max_iterations=config.max_iterations,
            memory=config.memory,
            armijo_factor=config.armijo_factor,
            armijo_c1=config.armijo_c1)
        u = result.x.reshape(shape)
        u[pinned] = 0.0
        iterations = result.iterations
        evaluations = result.evaluations
        if not result.converged:
            report = _build_report(u, f, f_bar, grid, pinned, p, eps, iterations,
                                   evaluations, method, crack_length, length_penalty)
            raise NonConvergence(
                f"no convergence in {iterations} iterations, "
                f"residual {report.residual:.3e} > {config.grad_tolerance:.3e}",
                report=report, field=u)

    report = _build_report(u, f, f_bar, grid, pinned, p, eps, iterations,
                           evaluations, method, crack_length, length_penalty)
    if report.residual > config.grad_tolerance:
        raise NonConvergence(
            f"linear path residual {report.residual:.3e} above "
            f"tolerance {config.grad_tolerance:.3e}", report=report, field=u)
    return u, report


def _build_report(u, f, f_bar, grid, pinned, p, eps, iterations, evaluations,
                  method, crack_length, length_penalty) -> ComplianceReport:
    value, grad = energy_and_gradient(u, f_bar, grid, pinned, p, eps)
    q = p / (p - 1.0)
    c_energy = gradient_pnorm(u, grid, p) / q
    c_work = work_integral(u, f, grid) / q
    sigma = flux(u, grid, p, eps=0.0)
    return ComplianceReport(
        p=p,
        energy=value,
        compliance_energy_form=c_energy,
        compliance_work_form=c_work,
        flux_pnorm=flux_pnorm(sigma, grid, p),
        crack_length=crack_length,
        penalized_objective=c_energy + length_penalty * crack_length,
        iterations=iterations,
        residual=float(np.abs(grad).max()),
        regularization_eps=eps,
        method=method,
        evaluations=evaluations)


def solve_cracks(spec, cracks: CrackSet, f, nodes_per_side: int,
                 config: Optional[SolverConfig] = None,
                 ) -> tuple[GridField, ComplianceReport, ConstraintMask]:
    """Rasterize cracks on a fresh grid for `spec` and solve.

    f may be a callable of node coordinates or a node array.  The report
    carries the exact segment length total and spec.length_penalty.
    """
    from .geometry import build_grid, rasterize, total_length

    grid = build_grid(spec, nodes_per_side)
    mask = rasterize(cracks, grid)
    if callable(f):
        from .sources import sample_on_grid
        f_values = sample_on_grid(f, grid)
    else:
        f_values = np.asarray(f, dtype=float)
    u, report = solve(f_values, grid, mask, spec.p, config,
                      crack_length=total_length(cracks),
                      length_penalty=spec.length_penalty)
    return u, report, mask


@dataclass(frozen=True)
class DivergenceCheck:
    """Weak-form residuals of -div(sigma) = f against smooth bumps."""
    residuals: tuple[float, ...]
    scales: tuple[float, ...]

    @property
    def max_relative(self) -> float:
        return max(r / s for r, s in zip(self.residuals, self.scales))


def _bump_values(centers: np.ndarray, center: np.ndarray, radius: float,
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Raised-cosine tensor bump and its gradient at the given points.

    Each factor is cos^2(pi y / 2) for |y| < 1 and 0 outside, with y the
    rescaled offset along one axis; the bump peaks at 1.  C^1 with
    derivatives bounded by pi/2 per axis, unlike a mollifier profile
    whose derivatives blow up at the support edge and wreck midpoint
    quadrature of the pairing on modest grids.
    """
    dim = centers.shape[-1]
    y = (centers - center) / radius
    inside = (np.abs(y) < 1.0).all(axis=-1)
    yc = np.clip(y, -1.0, 1.0)
    factors = np.cos(0.5 * np.pi * yc) ** 2
    dfactors = -(0.5 * np.pi) * np.sin(np.pi * yc) / radius
    phi = np.where(inside, factors.prod(axis=-1), 0.0)
    grads = []
    for k in range(dim):
        part = dfactors[..., k]
        for j in range(dim):
            if j != k:
                part = part * factors[..., j]
        grads.append(np.where(inside, part, 0.0))
    return phi, np.stack(grads, axis=0)


def divergence_residual(sigma: FluxField, f: np.ndarray, grid: GridDiscretization,
                        cracks: CrackSet, rng: np.random.Generator,
                        samples: int = 20,
                        radius_fraction: tuple[float, float] = (0.1, 0.25),
                        min_span_cells: float = 3.0,
                        ) -> DivergenceCheck:
    """Test int sigma . grad(phi) = int f phi on random interior bumps.

    Bump supports are kept inside the open box and at least one cell away
    from every crack segment, shrinking the radius range when placement
    keeps failing.  Radii are floored at min_span_cells cells: a bump
    sampled by only one or two cell centers pairs as pure noise, so a
    grid too coarse to fit a resolvable bump fails loudly instead.
    Residuals are exact-quadrature mismatches, so they carry both the
    solver residual and the O(h^2) discretization error.
    """
    from .geometry import _segment_node_distances

    centers = grid.node_coordinates()
    cell_centers = np.stack(
        [cell_means(centers[..., k]) for k in range(grid.dim)], axis=-1)
    f_bar = cell_means(f)
    lo, hi = radius_fraction
    box = grid.half_width
    floor = min_span_cells * grid.h
    residuals = []
    scales = []
    for _ in range(samples):
        placed = None
        shrink = 1.0
        for _ in range(6):
            for _ in range(400):
                radius = max(float(rng.uniform(lo, hi)) * box * shrink, floor)
                margin = box - radius - grid.h
                if margin <= 0:
                    continue
                center = np.asarray(grid.center) + rng.uniform(-margin, margin, size=grid.dim)
                if _support_clears_cracks(center, radius, cracks, grid.h):
                    placed = (center, radius)
                    break
            if placed is not None:
                break
            shrink *= 0.5
        if placed is None:
            raise ValueError(
                "could not place a resolvable bump clear of the cracks; "
                "box too crowded or grid too coarse")
        center, radius = placed
        phi, grad_phi = _bump_values(cell_centers, center, radius)
        lhs = grid.cell_volume * float(np.sum((sigma * grad_phi).sum(axis=0)))
        rhs = grid.cell_volume * float(np.sum(f_bar * phi))
        scale = abs(lhs) + abs(rhs)
        residuals.append(abs(lhs - rhs))
        scales.append(max(scale, 1e-300))
    return DivergenceCheck(residuals=tuple(residuals), scales=tuple(scales))


def _support_clears_cracks(center: np.ndarray, radius: float, cracks: CrackSet,
                           clearance: float) -> bool:
    from .geometry import _segment_node_distances

    if len(cracks) == 0:
        return True
    point = center.reshape((1,) * len(center) + (len(center),))
    for seg in cracks:
        dist = float(_segment_node_distances(point, seg).ravel()[0])
        # the support box has circumradius radius*sqrt(dim); the segment
        # must stay clear of it by at least one cell
        if dist <= radius * np.sqrt(len(center)) + clearance:
            return False
    return True
