"""Limited-memory quasi-Newton descent with Armijo backtracking.

All solver contracts in this package certify convergence through the max norm
of the projected gradient, so this loop tracks exactly that quantity.  The
search direction is the standard two-loop L-BFGS recursion; whenever it fails
to be a descent direction (or the line search stalls on it) the memory is
dropped and the step retried along the raw negative gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DescentResult:
    x: np.ndarray
    value: float
    gradient: np.ndarray
    iterations: int
    converged: bool
    evaluations: int


def _two_loop_direction(grad, s_hist, y_hist, rho_hist):
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    gamma = float(s_hist[-1] @ y_hist[-1]) / float(y_hist[-1] @ y_hist[-1])
    q *= gamma
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


def _backtrack(fun, x, value, grad, direction, factor, c1, max_halvings=60):
    """Armijo backtracking from unit step; returns None when no step works."""
    slope = float(grad @ direction)
    if not np.isfinite(slope) or slope >= 0.0:
        return None, 0
    step = 1.0
    evals = 0
    for _ in range(max_halvings):
        x_new = x + step * direction
        value_new, grad_new = fun(x_new)
        evals += 1
        if np.isfinite(value_new) and value_new <= value + c1 * step * slope:
            return (step, x_new, value_new, grad_new), evals
        step *= factor
    return None, evals


def minimize(
    fun,
    x0,
    *,
    grad_tolerance: float,
    max_iterations: int,
    memory: int = 10,
    armijo_factor: float = 0.5,
    armijo_c1: float = 1e-4,
) -> DescentResult:
    """Minimize fun(x) -> (value, gradient) to a max-norm gradient tolerance.

    Stops when ||gradient||_inf <= grad_tolerance, when max_iterations is
    reached, or when no Armijo step makes progress along either the
    quasi-Newton or the steepest direction (numerical floor).
    """
    x = np.array(x0, dtype=float)
    value, grad = fun(x)
    evaluations = 1
    if x.size == 0:
        return DescentResult(x, value, grad, 0, True, evaluations)
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []

    iterations = 0
    gmax = float(np.max(np.abs(grad)))
    while gmax > grad_tolerance and iterations < max_iterations:
        if s_hist:
            direction = _two_loop_direction(grad, s_hist, y_hist, rho_hist)
        else:
            # unscaled first step; the backtracking line search fixes the size
            direction = -grad / max(float(np.linalg.norm(grad)), 1e-300)
        hit, evals = _backtrack(fun, x, value, grad, direction, armijo_factor, armijo_c1)
        evaluations += evals
        if hit is None and s_hist:
            # quasi-Newton direction unusable at this point; restart clean
            s_hist.clear()
            y_hist.clear()
            rho_hist.clear()
            direction = -grad / max(float(np.linalg.norm(grad)), 1e-300)
            hit, evals = _backtrack(fun, x, value, grad, direction, armijo_factor, armijo_c1)
            evaluations += evals
        if hit is None:
            break
        _, x_new, value_new, grad_new = hit
        s = x_new - x
        y = grad_new - grad
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x, value, grad = x_new, value_new, grad_new
        gmax = float(np.max(np.abs(grad)))
        iterations += 1

    return DescentResult(x, value, grad, iterations, gmax <= grad_tolerance, evaluations)
