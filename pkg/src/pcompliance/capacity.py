"""Variational capacity of small sets by direct energy minimization.

The capacity of a target E inside a box is estimated as

    inf { int |grad u|^p + int |u|^p :  u = 1 at every node within h/2 of E }

with a free boundary on a box comfortably larger than E (no 1/p factors).
Node pinning realizes "1 on a neighborhood of E" by an admissible
competitor, so every reported value is a true upper bound for that
neighborhood relaxation; h-convergence is checked empirically.  Reported
values are always the unregularized objective at the computed field, which
keeps the upper-bound property independent of solver smoothing.

Quadrature differs from the energy solver on purpose.  Cell-averaged
gradients annihilate checkerboard node patterns, and a capacity target
pins so few nodes that such a pattern can match the pin values with zero
energy, collapsing the infimum.  Evaluating the multilinear interpolant's
gradient at every cell corner (and |u|^p at the nodes, trapezoid weights)
leaves constants as the only zero-energy fields, which any pin removes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import descent, quadratics
from .errors import DegenerateTarget, NonConvergence
from .geometry import (CrackSet, GridDiscretization, Segment,
                       _segment_node_distances, axis_segment)
from .solver import SolverConfig, _corners, _weights


@dataclass(frozen=True)
class CapacityResult:
    value: float
    box_half_width: float
    grid_h: float
    p: float
    nodes_per_side: int
    pinned_nodes: int
    iterations: int
    residual: float


def target_pins(target, grid: GridDiscretization) -> np.ndarray:
    """Boolean node mask for a CrackSet, Segment, or point target.

    Segments pin nodes within h/2; a bare point pins its nearest node, so
    point targets never degenerate.
    """
    coords = grid.node_coordinates()
    pinned = np.zeros(grid.shape, dtype=bool)
    if isinstance(target, Segment):
        target = CrackSet.of(target)
    if isinstance(target, CrackSet):
        for seg in target:
            pinned |= _segment_node_distances(coords, seg) <= 0.5 * grid.h * (1 + 1e-9)
        return pinned
    point = np.asarray(target, dtype=float)
    if point.shape != (grid.dim,):
        raise ValueError(f"target must be a CrackSet, Segment, or point of dim {grid.dim}")
    offsets = coords - point
    dist_sq = (offsets * offsets).sum(axis=-1)
    pinned[np.unravel_index(np.argmin(dist_sq), grid.shape)] = True
    return pinned


def _corner_gradient_squares(u: np.ndarray, grid: GridDiscretization,
                             eps: float) -> tuple[list, list]:
    """|grad u|^2 of the multilinear interpolant at each cell corner.

    Returns per-corner squared gradients and the per-axis edge differences
    they were built from (needed again when scattering the chain rule).
    """
    diffs = [np.diff(u, axis=k) / grid.h for k in range(grid.dim)]
    squares = []
    for bits, node_slc in _corners(grid.dim):
        s = np.full(grid.cells_shape, eps * eps)
        for k in range(grid.dim):
            e_slc = list(node_slc)
            e_slc[k] = slice(None)
            d = diffs[k][tuple(e_slc)]
            s = s + d * d
        squares.append(s)
    return squares, diffs


def _capacity_value(u: np.ndarray, grid: GridDiscretization, p: float) -> float:
    squares, _ = _corner_gradient_squares(u, grid, 0.0)
    vol = grid.cell_volume
    total = sum(float(np.sum(s ** (p / 2.0))) for s in squares) / 2 ** grid.dim
    w = quadratics.node_weights(grid)
    total += float(np.sum(w * np.abs(u) ** p))
    return vol * total


def _capacity_gradient(u: np.ndarray, grid: GridDiscretization, pinned: np.ndarray,
                       p: float, eps: float) -> tuple[float, np.ndarray]:
    dim = grid.dim
    vol = grid.cell_volume
    squares, diffs = _corner_gradient_squares(u, grid, eps)
    w_node = quadratics.node_weights(grid)
    m = u * u + eps * eps
    value = vol * (sum(float(np.sum(s ** (p / 2.0))) for s in squares) / 2 ** dim
                   + float(np.sum(w_node * m ** (p / 2.0))))
    grad = vol * p * w_node * _weights(m, p) * u
    scale = vol * p / (2 ** dim * grid.h)
    for (bits, node_slc), s in zip(_corners(dim), squares):
        ws = scale * _weights(s, p)
        for k in range(dim):
            e_slc = list(node_slc)
            e_slc[k] = slice(None)
            flux = ws * diffs[k][tuple(e_slc)]
            high = list(node_slc)
            high[k] = slice(1, None)
            low = list(node_slc)
            low[k] = slice(None, -1)
            grad[tuple(high)] += flux
            grad[tuple(low)] -= flux
    grad[pinned] = 0.0
    return value, grad


def variational_capacity(target, p: float, grid: GridDiscretization,
                         config: Optional[SolverConfig] = None) -> CapacityResult:
    """Capacity estimate for a target pinned to 1 inside `grid`'s box.

    Raises DegenerateTarget when a nonempty segment target captures no
    node at this resolution.  The empty set returns exactly 0.
    """
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if config is None:
        config = SolverConfig()
    if isinstance(target, CrackSet) and len(target) == 0:
        return CapacityResult(0.0, grid.half_width, grid.h, p,
                              grid.nodes_per_side, 0, 0, 0.0)
    pinned = target_pins(target, grid)
    n_pinned = int(pinned.sum())
    if n_pinned == 0:
        raise DegenerateTarget(
            f"target captures no node at h = {grid.h:.4g}; refine the grid")

    method = config.method
    if method == "auto":
        method = "linear" if p == 2.0 else "descent"
    if method == "linear" and p != 2.0:
        raise ValueError("the linear path only applies to p = 2")

    if method == "linear":
        matrix = (quadratics.edge_stiffness_matrix(grid)
                  + quadratics.node_mass_matrix(grid))
        # stationarity of u^T(K+M)u under pinning; nonlinear gradient is
        # twice the row residual, hence the halved tolerance
        u_flat, iterations = quadratics.solve_pinned(
            matrix, np.zeros(grid.n_nodes), pinned.ravel(), pin_value=1.0,
            grad_tolerance=0.5 * config.grad_tolerance,
            prefer_direct=config.prefer_direct)
        u = u_flat.reshape(grid.shape)
        _, grad = _capacity_gradient(u, grid, pinned, p, 0.0)
        residual = float(np.abs(grad).max())
    else:
        if config.regularization_eps is not None:
            eps = config.regularization_eps
        elif p < 2.0:
            # the far field has near-zero gradients, where the p < 2
            # weights blow up; eps = 1e-4 caps that stiffness and shifts
            # the unregularized value by O(eps^p), below grid noise
            eps = 1e-4
        else:
            eps = 0.0
        shape = grid.shape

        def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
            value, grad = _capacity_gradient(x.reshape(shape), grid, pinned, p, eps)
            return value, grad.ravel()

        # the p = 2 minimizer is cheap and already carries the right
        # decay profile, so descent only corrects the p-dependent shape
        matrix = (quadratics.edge_stiffness_matrix(grid)
                  + quadratics.node_mass_matrix(grid))
        warm, _ = quadratics.solve_pinned(
            matrix, np.zeros(grid.n_nodes), pinned.ravel(), pin_value=1.0,
            grad_tolerance=1e-10, prefer_direct=config.prefer_direct)
        x0 = warm
        result = descent.minimize(
            objective, x0,
            grad_tolerance=config.grad_tolerance,
            max_iterations=config.max_iterations,
            memory=config.memory,
            armijo_factor=config.armijo_factor,
            armijo_c1=config.armijo_c1)
        u = result.x.reshape(shape)
        u[pinned] = 1.0
        iterations = result.iterations
        residual = float(np.abs(result.gradient).max())
        if not result.converged:
            raise NonConvergence(
                f"capacity minimization stalled at residual {residual:.3e} "
                f"after {iterations} iterations", field=u)

    return CapacityResult(
        value=_capacity_value(u, grid, p),
        box_half_width=grid.half_width,
        grid_h=grid.h,
        p=p,
        nodes_per_side=grid.nodes_per_side,
        pinned_nodes=n_pinned,
        iterations=iterations,
        residual=residual)


def segment_box(t: float, resolution: int, dim: int = 2,
                box_half_width: Optional[float] = None,
                center: Sequence[float] = ()) -> GridDiscretization:
    """Lattice-aligned box around a length-t segment.

    h = t / resolution exactly, so the segment endpoints land on nodes and
    sweeps over t share their relative discretization.  The half-width is
    rounded up to a whole number of cells from the default 4t + 1.
    """
    if t <= 0:
        raise ValueError(f"segment length must be positive, got {t}")
    if resolution < 1 or resolution % 2:
        raise ValueError("resolution must be a positive even cell count")
    h = t / resolution
    target = box_half_width if box_half_width is not None else 4.0 * t + 1.0
    half_cells = math.ceil(target / h - 1e-12)
    return GridDiscretization(2 * half_cells + 1, half_cells * h, dim,
                              tuple(center) if center else ())


def centered_segment(t: float, grid: GridDiscretization) -> Segment:
    start = tuple(c - (t / 2.0 if k == 0 else 0.0)
                  for k, c in enumerate(grid.center or (0.0,) * grid.dim))
    return axis_segment(start, 0, t)


def segment_capacity(t: float, p: float, dim: int = 2, resolution: int = 4,
                     box_half_width: Optional[float] = None,
                     center: Sequence[float] = (),
                     config: Optional[SolverConfig] = None) -> CapacityResult:
    grid = segment_box(t, resolution, dim, box_half_width, center)
    return variational_capacity(centered_segment(t, grid), p, grid, config)


def point_capacity(p: float, grid: GridDiscretization,
                   position: Optional[Sequence[float]] = None,
                   config: Optional[SolverConfig] = None) -> CapacityResult:
    where = tuple(position) if position is not None else (grid.center or (0.0,) * grid.dim)
    return variational_capacity(np.asarray(where, dtype=float), p, grid, config)


def capacity_sweep(ts: Sequence[float], p: float, dim: int = 2, resolution: int = 4,
                   box_half_width: Optional[float] = None,
                   config: Optional[SolverConfig] = None,
                   jobs: int = 1) -> tuple[CapacityResult, ...]:
    """Segment capacities over a sweep of lengths t (each must be <= 1)."""
    ts = [float(t) for t in ts]
    for t in ts:
        if not (0 < t <= 1.0):
            raise ValueError(f"sweep lengths must lie in (0, 1], got {t}")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(segment_capacity, t, p, dim, resolution,
                                   box_half_width, (), config) for t in ts]
            return tuple(f.result() for f in futures)
    return tuple(segment_capacity(t, p, dim, resolution, box_half_width, (), config)
                 for t in ts)


@dataclass(frozen=True)
class ScalingFit:
    """Least squares of log(cap) against log(t)."""
    slope: float
    intercept: float
    r_squared: float
    linear_r_squared: float

    def predict(self, ts: np.ndarray) -> np.ndarray:
        return np.exp(self.intercept) * np.asarray(ts) ** self.slope


@dataclass(frozen=True)
class LogarithmicFit:
    """cap = amplitude * (log(scale/t))^(1-p), scale profiled out."""
    amplitude: float
    scale: float
    p: float
    linear_r_squared: float

    def predict(self, ts: np.ndarray) -> np.ndarray:
        return self.amplitude * np.log(self.scale / np.asarray(ts)) ** (1.0 - self.p)


def _check_fit_inputs(ts, caps) -> tuple[np.ndarray, np.ndarray]:
    ts = np.asarray(ts, dtype=float)
    caps = np.asarray(caps, dtype=float)
    if ts.shape != caps.shape or ts.ndim != 1 or len(ts) < 3:
        raise ValueError("need >= 3 paired (t, cap) points")
    if (ts <= 0).any() or (caps <= 0).any():
        raise ValueError("scaling fits require strictly positive data")
    return ts, caps


def _linear_r2(caps: np.ndarray, predicted: np.ndarray) -> float:
    total = float(np.sum((caps - caps.mean()) ** 2))
    resid = float(np.sum((caps - predicted) ** 2))
    if total == 0.0:
        return 1.0 if resid == 0.0 else 0.0
    return 1.0 - resid / total


def scaling_fit(ts: Sequence[float], caps: Sequence[float]) -> ScalingFit:
    ts, caps = _check_fit_inputs(ts, caps)
    x = np.log(ts)
    y = np.log(caps)
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ (slope, intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if total == 0.0 else 1.0 - float(np.sum((y - fitted) ** 2)) / total
    fit = ScalingFit(float(slope), float(intercept), r2, 0.0)
    return ScalingFit(fit.slope, fit.intercept, fit.r_squared,
                      _linear_r2(caps, fit.predict(ts)))


def logarithmic_fit(ts: Sequence[float], caps: Sequence[float], p: float) -> LogarithmicFit:
    """Profile least squares over the inner log scale, amplitude closed form.

    Two free parameters, same as the power law, so linear-space r^2 values
    of the two models are directly comparable.
    """
    ts, caps = _check_fit_inputs(ts, caps)
    if p <= 1:
        raise ValueError("the logarithmic model needs p > 1")
    t_max = float(ts.max())

    def sse_for(log_scale: float) -> tuple[float, float]:
        scale = math.exp(log_scale)
        x = np.log(scale / ts) ** (1.0 - p)
        denom = float(np.dot(x, x))
        amp = float(np.dot(x, caps)) / denom if denom > 0 else 0.0
        return float(np.sum((caps - amp * x) ** 2)), amp

    opt = minimize_scalar(lambda ls: sse_for(ls)[0],
                          bounds=(math.log(t_max * 1.05), math.log(1e4 * t_max)),
                          method="bounded",
                          options={"xatol": 1e-10})
    _, amplitude = sse_for(float(opt.x))
    scale = math.exp(float(opt.x))
    fit = LogarithmicFit(amplitude, scale, p, 0.0)
    return LogarithmicFit(amplitude, scale, p, _linear_r2(caps, fit.predict(ts)))


@dataclass(frozen=True)
class RefinementRecord:
    p: float
    dim: int
    t: float
    coarse: CapacityResult
    fine: CapacityResult

    @property
    def ratio(self) -> float:
        return self.fine.value / self.coarse.value


def refinement_ratio(t: float, p: float, dim: int, box_half_width: float,
                     base_nodes: int,
                     config: Optional[SolverConfig] = None) -> RefinementRecord:
    """Capacity of a centered segment at h and h/2 on one fixed box.

    The fine grid doubles every cell of the coarse one, so the ratio
    isolates the resolution dependence: it stays near 1 where segments
    carry positive capacity and keeps sinking where they are removable.
    """
    coarse_grid = GridDiscretization(base_nodes, box_half_width, dim)
    fine_grid = GridDiscretization(2 * base_nodes - 1, box_half_width, dim)
    seg = centered_segment(t, coarse_grid)
    return RefinementRecord(
        p=p, dim=dim, t=t,
        coarse=variational_capacity(seg, p, coarse_grid, config),
        fine=variational_capacity(seg, p, fine_grid, config))
