"""Best constant in the crack Poincare inequality on free-boundary cubes.

On a cube whose mask pins only a crack (never the outer boundary), the
smallest constant C with  int |u|^p <= C int |grad u|^p  over admissible
fields is the reciprocal of the Rayleigh quotient infimum.  For p = 2 the
infimum is a generalized eigenvalue problem; other p run a normalized
quotient descent.  Both report the discrete best constant at the given h,
not a continuum claim.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from . import descent, quadratics
from .capacity import CapacityResult, segment_capacity
from .errors import NonConvergence, UnpinnedMask
from .geometry import (ConstraintMask, CrackSet, GridDiscretization,
                       axis_segment, rasterize)
from .solver import (SolverConfig, _corners, _weights, cell_gradients,
                     cell_means, zero_energy_gauge_free, zero_energy_unbounded)


@dataclass(frozen=True)
class PoincareResult:
    best_constant: float
    rayleigh_quotient: float
    p: float
    delta: float
    grid_h: float
    method: str
    iterations: int
    residual: float
    capacity_ref: Optional[CapacityResult] = None


def mass_pnorm(u: np.ndarray, grid: GridDiscretization, p: float) -> float:
    """int |u|^p by midpoint quadrature on cell means."""
    m = cell_means(u) ** 2
    return grid.cell_volume * float(np.sum(m ** (p / 2.0)))


def _validate_mask(grid: GridDiscretization, mask: ConstraintMask) -> None:
    if mask.grid != grid:
        raise ValueError("mask was built for a different grid")
    if mask.pinned[grid.boundary_mask()].all():
        raise ValueError("the cube boundary must stay free; only the crack pins")
    if mask.interior_pinned() == 0:
        raise UnpinnedMask("no interior node pinned; the quotient infimum is 0")
    if zero_energy_unbounded(mask.pinned):
        raise UnpinnedMask(
            "pins admit a zero-energy checkerboard mode with nonzero mean, "
            "so the quotient infimum is 0; widen the crack or refine")


def best_poincare_constant(grid: GridDiscretization, mask: ConstraintMask,
                           p: float, config: Optional[SolverConfig] = None,
                           ) -> PoincareResult:
    """Measure the discrete best constant for fields vanishing on the mask."""
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if config is None:
        config = SolverConfig()
    _validate_mask(grid, mask)

    method = config.method
    if method == "auto":
        method = "linear" if p == 2.0 and zero_energy_gauge_free(mask.pinned) else "descent"
    if method == "linear":
        if p != 2.0:
            raise ValueError("the eigenvalue path only applies to p = 2")
        if not zero_energy_gauge_free(mask.pinned):
            raise ValueError("pinned stiffness block is singular; use descent")
        mu, iterations, residual = _largest_mass_over_stiffness(grid, mask.pinned)
        quotient = 1.0 / mu
    else:
        mu, iterations, residual = _quotient_descent(grid, mask.pinned, p, config)
        quotient = 1.0 / mu

    return PoincareResult(
        best_constant=mu,
        rayleigh_quotient=quotient,
        p=p,
        delta=2.0 * grid.half_width,
        grid_h=grid.h,
        method=method,
        iterations=iterations,
        residual=residual)


def _largest_mass_over_stiffness(grid: GridDiscretization, pinned: np.ndarray,
                                 ) -> tuple[float, int, float]:
    """max u^T Mass u / u^T Stiff u on free nodes = the best constant."""
    free = ~pinned.ravel()
    stiffness = quadratics.stiffness_matrix(grid)
    mass = quadratics.mass_matrix(grid)
    k_ff = stiffness[free][:, free].tocsc()
    m_ff = mass[free][:, free].tocsr()
    n_free = int(free.sum())
    if n_free <= 1200:
        values = scipy.linalg.eigh(m_ff.toarray(), k_ff.toarray(),
                                   eigvals_only=True)
        return float(values[-1]), 0, 0.0
    v0 = np.ones(n_free)
    values, vectors = spla.eigsh(m_ff, k=1, M=k_ff, which="LA", v0=v0)
    mu = float(values[0])
    v = vectors[:, 0]
    residual = float(np.abs(m_ff @ v - mu * (k_ff @ v)).max())
    return mu, 0, residual


def _quotient_descent(grid: GridDiscretization, pinned: np.ndarray, p: float,
                      config: SolverConfig) -> tuple[float, int, float]:
    """Minimize int|grad u|^p / int|u|^p over the unit sphere of fields."""
    eps = config.resolve_eps(p, 1.0)
    shape = grid.shape
    h = grid.h
    dim = grid.dim
    vol = grid.cell_volume
    gscale = vol / (2 ** (dim - 1) * h)
    mscale = vol / 2 ** dim

    def forms(u: np.ndarray) -> tuple[float, np.ndarray, float, np.ndarray]:
        g = cell_gradients(u, h)
        s = (g * g).sum(axis=0) + eps * eps
        u_bar = cell_means(u)
        m = u_bar * u_bar + eps * eps
        num = vol * float(np.sum(s ** (p / 2.0)))
        den = vol * float(np.sum(m ** (p / 2.0)))
        wg = (p * _weights(s, p)) * g
        wm = (p * _weights(m, p)) * u_bar
        d_num = np.zeros_like(u)
        d_den = np.zeros_like(u)
        for bits, sl in _corners(dim):
            contrib = None
            for k in range(dim):
                part = gscale * wg[k] if bits[k] else -gscale * wg[k]
                contrib = part if contrib is None else contrib + part
            d_num[sl] += contrib
            d_den[sl] += mscale * wm
        d_num[pinned] = 0.0
        d_den[pinned] = 0.0
        return num, d_num, den, d_den

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        norm = float(np.linalg.norm(x))
        xh = x / norm
        num, d_num, den, d_den = forms(xh.reshape(shape))
        quotient = num / den
        grad = (d_num.ravel() - quotient * d_den.ravel()) / den
        grad -= float(np.dot(grad, xh)) * xh
        return quotient, grad / norm

    x0 = np.ones(grid.n_nodes)
    x0[pinned.ravel()] = 0.0
    result = descent.minimize(
        objective, x0,
        grad_tolerance=config.grad_tolerance,
        max_iterations=config.max_iterations,
        memory=config.memory,
        armijo_factor=config.armijo_factor,
        armijo_c1=config.armijo_c1)
    if not result.converged:
        raise NonConvergence(
            f"quotient descent stalled after {result.iterations} iterations "
            f"at residual {np.abs(result.gradient).max():.3e}")
    return (1.0 / result.value, result.iterations,
            float(np.abs(result.gradient).max()))


@dataclass(frozen=True)
class CrackCube:
    """Cube of side delta with one centered axis crack, boundary free."""
    grid: GridDiscretization
    mask: ConstraintMask
    cracks: CrackSet
    delta: float
    relative_length: float


def crack_cube(delta: float, relative_length: float, nodes_per_side: int,
               dim: int = 2) -> CrackCube:
    if not (0 < relative_length < 1):
        raise ValueError("relative crack length must lie in (0, 1)")
    if delta <= 0:
        raise ValueError("delta must be positive")
    grid = GridDiscretization(nodes_per_side, delta / 2.0, dim)
    length = relative_length * delta
    seg = axis_segment((-length / 2.0,) + (0.0,) * (dim - 1), 0, length)
    cracks = CrackSet.of(seg)
    mask = rasterize(cracks, grid, include_boundary=False)
    return CrackCube(grid, mask, cracks, delta, relative_length)


def crack_poincare(delta: float, relative_length: float, nodes_per_side: int,
                   p: float, dim: int = 2,
                   config: Optional[SolverConfig] = None,
                   with_capacity: bool = False,
                   capacity_resolution: int = 8) -> PoincareResult:
    """Best constant for a centered crack cube, optionally paired with the
    capacity of the unit-scale crack of the same relative length."""
    cube = crack_cube(delta, relative_length, nodes_per_side, dim)
    result = best_poincare_constant(cube.grid, cube.mask, p, config)
    if with_capacity:
        cap = segment_capacity(relative_length, p, dim,
                               resolution=capacity_resolution)
        result = replace(result, capacity_ref=cap)
    return result
