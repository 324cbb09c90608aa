"""Damped fixed-point and Newton iterations for scalar complex equations."""

import cmath
import math
import logging
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import DivergenceError, NumericalError, ValidationError
from .protocol import SolverDefaults

logger = logging.getLogger(__name__)


@dataclass
class FixedPointResult:
    value: complex
    residual: float
    iterations: int
    damping: float


def scaled_defect(rhs: Callable[[complex], complex], m: complex) -> float:
    """|rhs(m) - m| / max(1, |m|); inf when rhs cannot be evaluated at m."""
    try:
        f = rhs(m)
    except (NumericalError, ZeroDivisionError, OverflowError):
        return float("inf")
    if not cmath.isfinite(f):
        return float("inf")
    return abs(f - m) / max(1.0, abs(m))


def _newton_step(rhs, m: complex) -> Optional[complex]:
    """One Newton step on g(m) = m - rhs(m), derivative by a complex forward difference."""
    h = 1e-7 * max(1.0, abs(m))
    try:
        g0 = m - rhs(m)
        g1 = (m + h) - rhs(m + h)
    except (NumericalError, ZeroDivisionError, OverflowError):
        return None
    dg = (g1 - g0) / h
    if dg == 0 or not cmath.isfinite(dg):
        return None
    step = m - g0 / dg
    return step if cmath.isfinite(step) else None


def solve_fixed_point(
    rhs: Callable[[complex], complex],
    m0: complex,
    *,
    tol: float = SolverDefaults.TOL,
    max_iter: int = SolverDefaults.MAX_ITER,
    min_damping: float = SolverDefaults.MIN_DAMPING,
    newton_threshold: float = SolverDefaults.NEWTON_THRESHOLD,
    admissible: Optional[Callable[[complex], bool]] = None,
    what: str = "fixed-point iteration",
) -> FixedPointResult:
    """
    Solve m = rhs(m) by m <- (1 - a) m + a rhs(m).

    The damping a starts at 1 and halves whenever a step would raise the
    residual, down to min_damping. Once the residual is below
    newton_threshold, Newton steps are tried first and kept only when they
    lower the residual and pass `admissible`.
    """
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be at least 1, got {max_iter}")

    ok = admissible or (lambda m: True)
    m = complex(m0)
    r = scaled_defect(rhs, m)
    alpha = 1.0
    it = 0

    while r >= tol:
        if it >= max_iter:
            raise DivergenceError(r, it, what)
        it += 1

        if r < newton_threshold:
            cand = _newton_step(rhs, m)
            if cand is not None and ok(cand):
                r_new = scaled_defect(rhs, cand)
                if r_new < r:
                    m, r = cand, r_new
                    continue

        if not cmath.isfinite(r):
            raise DivergenceError(r, it, what)
        cand = (1.0 - alpha) * m + alpha * rhs(m)
        r_new = scaled_defect(rhs, cand)
        if r_new > r and alpha > min_damping:
            alpha = max(alpha / 2.0, min_damping)
            logger.debug("%s: residual rose to %.3g, damping now %g", what, r_new, alpha)
            continue
        if not cmath.isfinite(r_new):
            raise DivergenceError(r_new, it, what)
        m, r = cand, r_new

    return FixedPointResult(value=m, residual=r, iterations=it, damping=alpha)


def newton_solve(
    rhs: Callable[[complex], complex],
    m0: complex,
    *,
    tol: float = SolverDefaults.TOL,
    max_iter: int = SolverDefaults.STEP_NEWTON_ITER,
    min_damping: float = SolverDefaults.MIN_DAMPING,
    admissible: Optional[Callable[[complex], bool]] = None,
    what: str = "newton solve",
) -> FixedPointResult:
    """
    Solve m = rhs(m) by damped Newton steps from a start that is already close.

    A step is halved until it lowers the residual and passes `admissible`;
    going below min_damping is a divergence.
    """
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be at least 1, got {max_iter}")

    ok = admissible or (lambda m: True)
    m = complex(m0)
    r = scaled_defect(rhs, m)
    if not math.isfinite(r):
        raise DivergenceError(r, 0, what)
    smallest = 1.0
    it = 0

    while r >= tol:
        if it >= max_iter:
            raise DivergenceError(r, it, what)
        it += 1
        target = _newton_step(rhs, m)
        if target is None:
            raise DivergenceError(r, it, what)
        alpha = 1.0
        while True:
            cand = m + alpha * (target - m)
            r_new = scaled_defect(rhs, cand)
            if r_new < r and ok(cand):
                break
            alpha /= 2.0
            if alpha < min_damping:
                raise DivergenceError(r, it, what)
        smallest = min(smallest, alpha)
        m, r = cand, r_new

    return FixedPointResult(value=m, residual=r, iterations=it, damping=smallest)
