"""BFGS with a strong-Wolfe line search."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from qstbench.errors import LineSearchStalled

# objective(x) -> (value, gradient)
Objective = Callable[[np.ndarray], "tuple[float, np.ndarray]"]

C1 = 1e-4
C2 = 0.9
CURVATURE_EPS = 1e-12
MAX_LINE_SEARCH_FAILURES = 20


class BfgsResult(NamedTuple):
    x: np.ndarray
    f_value: float
    iterations: int
    converged: bool


def _interpolate(a_lo, f_lo, df_lo, a_hi, f_hi):
    """Minimiser of the quadratic through (a_lo, f_lo, df_lo) and (a_hi, f_hi),
    kept away from the interval ends; bisection when that fails."""
    width = a_hi - a_lo
    denom = 2.0 * (f_hi - f_lo - df_lo * width)
    lo, hi = sorted((a_lo, a_hi))
    margin = 0.1 * abs(width)
    if denom > 0 and np.isfinite(f_hi):
        a = a_lo - df_lo * width * width / denom
        if lo + margin <= a <= hi - margin:
            return a
    return 0.5 * (a_lo + a_hi)


def strong_wolfe_search(
    fun: Objective,
    x: np.ndarray,
    f0: float,
    g0: np.ndarray,
    direction: np.ndarray,
    c1: float = C1,
    c2: float = C2,
    alpha_init: float = 1.0,
    alpha_max: float = 1e10,
    max_evals: int = 40,
):
    """Find a step satisfying the strong Wolfe conditions.

    Returns ``(alpha, f_new, g_new)`` or ``None`` when no acceptable step was
    found within ``max_evals`` objective evaluations.
    """
    dphi0 = float(g0 @ direction)
    if not dphi0 < 0:
        return None
    evals = 0

    def phi(alpha):
        nonlocal evals
        evals += 1
        f, g = fun(x + alpha * direction)
        f = float(f)
        if not np.isfinite(f):
            return np.inf, None, np.nan
        return f, g, float(g @ direction)

    def zoom(a_lo, f_lo, df_lo, a_hi, f_hi):
        while evals < max_evals:
            a = _interpolate(a_lo, f_lo, df_lo, a_hi, f_hi)
            if a == a_lo or a == a_hi:
                return None
            f, g, df = phi(a)
            if f > f0 + c1 * a * dphi0 or f >= f_lo:
                a_hi, f_hi = a, f
            else:
                if abs(df) <= -c2 * dphi0:
                    return a, f, g
                if df * (a_hi - a_lo) >= 0:
                    a_hi, f_hi = a_lo, f_lo
                a_lo, f_lo, df_lo = a, f, df
        return None

    a_prev, f_prev, df_prev = 0.0, f0, dphi0
    a = alpha_init
    first = True
    while evals < max_evals:
        f, g, df = phi(a)
        if f > f0 + c1 * a * dphi0 or (not first and f >= f_prev):
            return zoom(a_prev, f_prev, df_prev, a, f)
        if abs(df) <= -c2 * dphi0:
            return a, f, g
        if df >= 0:
            return zoom(a, f, df, a_prev, f_prev)
        a_prev, f_prev, df_prev = a, f, df
        a = min(2.0 * a, alpha_max)
        first = False
    return None


def bfgs_minimize(
    fun: Objective,
    x0,
    tolerance: float = 1e-8,
    max_iter: int = 500,
    callback: Callable[[np.ndarray, float], None] | None = None,
) -> BfgsResult:
    """Minimise ``fun`` with BFGS using an inverse-Hessian update.

    ``fun`` returns ``(value, gradient)``. Iteration stops when the gradient
    infinity-norm drops to ``tolerance`` or after ``max_iter`` accepted steps.
    The Hessian update is skipped when ``y.s <= 1e-12``; a failed line search
    resets the inverse Hessian to the identity.

    Raises:
        LineSearchStalled: ``MAX_LINE_SEARCH_FAILURES`` line searches failed in
            a row. The last iterate is attached to the exception.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    f = float(f)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the starting point")
    n = x.size
    eye = np.eye(n)
    h_inv = eye.copy()
    scaled = False
    failures = 0
    iterations = 0

    while iterations < max_iter:
        if np.max(np.abs(g)) <= tolerance:
            return BfgsResult(x, f, iterations, True)
        direction = -h_inv @ g
        if g @ direction >= 0:
            h_inv = eye.copy()
            direction = -g
        step = strong_wolfe_search(fun, x, f, g, direction)
        if step is None:
            failures += 1
            if failures >= MAX_LINE_SEARCH_FAILURES:
                raise LineSearchStalled(
                    f"line search failed {failures} times in a row",
                    x=x, f_value=f, iterations=iterations,
                )
            h_inv = eye.copy()
            scaled = False
            continue
        failures = 0
        alpha, f_new, g_new = step
        s = alpha * direction
        y = g_new - g
        x = x + s
        f, g = f_new, g_new
        iterations += 1
        if callback is not None:
            callback(x, f)

        ys = float(y @ s)
        if ys > CURVATURE_EPS:
            if not scaled:
                h_inv = eye * (ys / float(y @ y))
                scaled = True
            rho = 1.0 / ys
            left = eye - rho * np.outer(s, y)
            h_inv = left @ h_inv @ left.T + rho * np.outer(s, s)

    return BfgsResult(x, f, iterations, bool(np.max(np.abs(g)) <= tolerance))
