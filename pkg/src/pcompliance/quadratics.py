"""Sparse assembly of the quadratic forms behind the p = 2 fast paths.

The discrete gradient averages forward differences over each cell, so along
axis k it is the Kronecker product of one 1-d difference factor with adjacent
mean factors on the remaining axes; the cell-mean operator is the product of
mean factors only.  With G_k and M assembled sparsely,

    stiffness = h^dim * sum_k G_k^T G_k        (energy form  int |grad u|^2)
    mass      = h^dim * M^T M                  (mass form    int u^2, midpoint)

and the p = 2 energy is (1/2) u^T stiffness u - (mass @ f) . u.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import GridDiscretization


def _difference_1d(m: int) -> sp.csr_matrix:
    data = np.repeat([[-1.0, 1.0]], m - 1, axis=0).ravel()
    rows = np.repeat(np.arange(m - 1), 2)
    cols = np.ravel(np.column_stack([np.arange(m - 1), np.arange(1, m)]))
    return sp.csr_matrix((data, (rows, cols)), shape=(m - 1, m))


def _mean_1d(m: int) -> sp.csr_matrix:
    data = np.full(2 * (m - 1), 0.5)
    rows = np.repeat(np.arange(m - 1), 2)
    cols = np.ravel(np.column_stack([np.arange(m - 1), np.arange(1, m)]))
    return sp.csr_matrix((data, (rows, cols)), shape=(m - 1, m))


def gradient_operator(grid: GridDiscretization, axis: int) -> sp.csr_matrix:
    """Sparse map from flat node values to flat cell gradient component."""
    m = grid.nodes_per_side
    op = None
    for k in range(grid.dim):
        factor = _difference_1d(m) if k == axis else _mean_1d(m)
        op = factor if op is None else sp.kron(op, factor, format="csr")
    return (op / grid.h).tocsr()


def mean_operator(grid: GridDiscretization) -> sp.csr_matrix:
    m = grid.nodes_per_side
    op = None
    for _ in range(grid.dim):
        factor = _mean_1d(m)
        op = factor if op is None else sp.kron(op, factor, format="csr")
    return op.tocsr()


def stiffness_matrix(grid: GridDiscretization) -> sp.csr_matrix:
    acc = None
    for k in range(grid.dim):
        g = gradient_operator(grid, k)
        term = (g.T @ g).tocsr()
        acc = term if acc is None else acc + term
    return (grid.cell_volume * acc).tocsr()

def mass_matrix(grid: GridDiscretization) -> sp.csr_matrix:
    m = mean_operator(grid)
    return (grid.cell_volume * (m.T @ m)).tocsr()


def _trapezoid_1d(m: int) -> np.ndarray:
    w = np.ones(m)
    w[0] = w[-1] = 0.5
    return w


def edge_stiffness_matrix(grid: GridDiscretization) -> sp.csr_matrix:
    """Edge-difference stiffness: int |grad u|^2 by corner quadrature.

    Unlike `stiffness_matrix`, whose cell-averaged gradients annihilate
    checkerboard modes, this form's kernel is constants only, so pinning
    any single node makes the free block positive definite.
    """
    m = grid.nodes_per_side
    d = _difference_1d(m)
    second = (d.T @ d).tocsr() / (grid.h * grid.h)
    weights = sp.diags(_trapezoid_1d(m))
    acc = None
    for k in range(grid.dim):
        op = None
        for j in range(grid.dim):
            factor = second if j == k else weights
            op = factor if op is None else sp.kron(op, factor, format="csr")
        acc = op if acc is None else acc + op
    return (grid.cell_volume * acc).tocsr()


def node_weights(grid: GridDiscretization) -> np.ndarray:
    """Trapezoid quadrature weight per node, shaped like the grid."""
    w = np.array(1.0)
    for _ in range(grid.dim):
        w = np.multiply.outer(w, _trapezoid_1d(grid.nodes_per_side))
    return w.reshape(grid.shape)


def node_mass_matrix(grid: GridDiscretization) -> sp.csr_matrix:
    """Diagonal mass: int u^2 by trapezoid quadrature at the nodes."""
    return sp.diags(grid.cell_volume * node_weights(grid).ravel()).tocsr()


def solve_pinned(
    matrix: sp.spmatrix,
    rhs: np.ndarray,
    pinned_flat: np.ndarray,
    pin_value: float = 0.0,
    *,
    grad_tolerance: float = 1e-10,
    prefer_direct: bool | None = None,
) -> tuple[np.ndarray, int]:
    """Solve matrix @ u = rhs on free entries with pinned entries fixed.

    Returns the full flat solution and the iteration count (0 for a direct
    factorization).  Direct solves are used by default up to moderate sizes
    or in one and two dimensions, where the fill-in stays cheap; otherwise a
    Jacobi-preconditioned conjugate gradient loop is tightened until the free
    residual satisfies the max-norm tolerance.
    """
    n = matrix.shape[0]
    free = ~pinned_flat
    n_free = int(free.sum())
    u = np.full(n, float(pin_value))
    u[~free] = pin_value
    if n_free == 0:
        return u, 0
    csr = matrix.tocsr()
    a_ff = csr[free][:, free].tocsc()
    b = rhs[free].astype(float, copy=True)
    if pin_value != 0.0:
        coupling = csr[free][:, ~free]
        b -= coupling @ np.full(n - n_free, float(pin_value))
    direct = prefer_direct
    if direct is None:
        direct = n_free <= 80_000
    if direct:
        x = spla.splu(a_ff).solve(b)
        iterations = 0
    else:
        diag = a_ff.diagonal()
        precond = spla.LinearOperator(a_ff.shape, matvec=lambda v: v / diag)
        x = np.zeros(n_free)
        iterations = 0
        atol = max(0.3 * grad_tolerance, 1e-14 * float(np.linalg.norm(b)))
        for _ in range(4):
            counter = _IterationCounter()
            x, info = spla.cg(a_ff, b, x0=x, rtol=0.0, atol=atol, maxiter=20 * n_free, M=precond, callback=counter)
            iterations += counter.count
            residual = np.abs(b - a_ff @ x).max()
            if residual <= grad_tolerance or info != 0:
                break
            atol *= 0.05
    u[free] = x
    return u, iterations


class _IterationCounter:
    def __init__(self):
        self.count = 0

    def __call__(self, _):
        self.count += 1
