"""Vectorized safeguarded Newton iteration for strictly monotone equations.

All the implicit relations of the model (pressure, temperature, dual
pressure, the scalar potential shift) are strictly monotone scalar
equations, one per state.  :func:`solve_monotone` solves a whole array of
them at once: each element keeps its own bracket, Newton steps that leave
the bracket are replaced by bisection, and steps are clipped to
``max_step`` so that an unbracketed search expands geometrically.
"""

from __future__ import annotations

from typing import Callable, Tuple

import numpy as np

from .errors import ConvergenceError, OverflowGuardError

DEFAULT_TOL = 1e-12
DEFAULT_MAXITER = 200
EXP_GUARD = 700.0

_EPS = np.finfo(float).eps


def solve_monotone(
    fun: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
    x0,
    *,
    lo=None,
    hi=None,
    increasing: bool = True,
    tol: float = DEFAULT_TOL,
    maxiter: int = DEFAULT_MAXITER,
    max_step: float = np.log(10.0),
    x_limit: float = EXP_GUARD,
    what: str = "root",
    strict: bool = True,
) -> np.ndarray:
    """Solve ``fun(x) = 0`` elementwise for a strictly monotone ``fun``.

    ``fun`` returns ``(f, df)`` with the same shape as ``x``.  Iteration
    stops where ``|f| <= tol`` or where the Newton correction has reached
    round-off level.  ``x_limit`` bounds ``|x|``; the unknowns are
    logarithms of positive quantities, so leaving it means the state is
    outside the representable range.  With ``strict=False`` such
    elements are returned as NaN instead of raising.
    """
    x = np.array(x0, dtype=float, copy=True)
    shape = x.shape
    lo = np.full(shape, -np.inf) if lo is None else np.array(np.broadcast_to(lo, shape), dtype=float)
    hi = np.full(shape, np.inf) if hi is None else np.array(np.broadcast_to(hi, shape), dtype=float)
    sgn = 1.0 if increasing else -1.0
    done = np.zeros(shape, dtype=bool)
    last_good = np.full(shape, np.nan)
    # per-element clip length; doubles while the search keeps running one way
    reach = np.full(shape, float(max_step))
    prev_dir = np.zeros(shape)

    for _ in range(maxiter):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            f, df = fun(x)
        f = sgn * np.asarray(f, dtype=float)
        df = sgn * np.asarray(df, dtype=float)

        done |= np.abs(f) <= tol
        hi = np.where(~done & (f > 0), np.minimum(hi, x), hi)
        lo = np.where(~done & (f < 0), np.maximum(lo, x), lo)
        if done.all():
            return x

        bad = ~np.isfinite(f)
        last_good = np.where(bad, last_good, x)
        good = ~bad & np.isfinite(df) & (df > 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            step = np.where(good, -f / np.where(good, df, 1.0), 0.0)
        step = np.where(~good & ~bad, -np.sign(f) * reach, step)
        clipped = np.abs(step) > reach
        direction = np.sign(step)
        reach = np.where(clipped & (direction == prev_dir), 2.0 * reach, max_step)
        prev_dir = np.where(clipped, direction, 0.0)
        step = np.clip(step, -reach, reach)
        xn = x + step

        # Non-finite residuals mean the iterate overshot into an unusable
        # region: bisect toward the bracket or the last usable iterate.
        bracketed = np.isfinite(lo) & np.isfinite(hi)
        outside = (xn <= lo) | (xn >= hi)
        with np.errstate(invalid="ignore"):
            mid = 0.5 * (lo + hi)
        xn = np.where(bracketed & (outside | bad), mid, xn)
        one_lo = np.isfinite(lo) & ~np.isfinite(hi)
        one_hi = np.isfinite(hi) & ~np.isfinite(lo)
        xn = np.where(one_lo & ((xn <= lo) | bad), np.where(bad, 0.5 * (lo + x), np.maximum(lo, x) + max_step), xn)
        xn = np.where(one_hi & ((xn >= hi) | bad), np.where(bad, 0.5 * (hi + x), np.minimum(hi, x) - max_step), xn)
        free_bad = bad & ~np.isfinite(lo) & ~np.isfinite(hi)
        xn = np.where(free_bad & np.isfinite(last_good), 0.5 * (x + last_good), xn)
        if np.any(free_bad & ~np.isfinite(last_good)):
            raise ConvergenceError(f"{what}: residual is not finite at the initial guess")

        stalled = np.abs(xn - x) <= 4.0 * _EPS * np.maximum(1.0, np.abs(x))
        done |= stalled & np.isfinite(f)
        x = np.where(done, x, xn)
        over = np.abs(x) > x_limit
        if np.any(over) and not strict:
            x = np.where(over, np.nan, x)
            done |= over
        elif np.any(over):
            raise OverflowGuardError(f"{what}: iterate left the representable range (|x| > {x_limit:g})")

    raise ConvergenceError(f"{what}: no convergence in {maxiter} iterations")
