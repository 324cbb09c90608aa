"""
Limiting Stieltjes transforms of S+, S-, the Marchenko-Pastur law and the
companion matrix (1/n) Y'Y.

All transforms use m(z) = int dG(lambda) / (lambda - z), z in the upper
half-plane.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import optimize

from .errors import (BracketError, BranchError, ConditioningError, DivergenceError,
                     NumericalError, PoleError, ValidationError)
from .fixed_point import newton_solve, scaled_defect, solve_fixed_point
from .protocol import Continuation, SolverDefaults, Transform
from .spectrum import SpectrumSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StieltjesSolution:
    """Solved transform value with iteration diagnostics."""
    z: complex
    m: complex
    residual: float
    iterations: int
    damping_used: float
    which: Transform


class DensityPoint(NamedTuple):
    x: float
    density: Optional[float]   # None when the solver failed at this point


def _check_c(c: float, lower: float = 1.0):
    if not (math.isfinite(c) and c > lower):
        raise ValidationError(f"concentration c must be > {lower:g}, got {c}")


def _check_upper(z: complex):
    if not z.imag > 0:
        raise ValidationError(f"z must lie in the upper half-plane, got {z}")


def mp_stieltjes(z: complex, c: float) -> complex:
    """
    Closed-form Marchenko-Pastur transform
        m(z) = (1 - c - z + sqrt((1 + c - z)^2 - 4c)) / (2cz).
    The root is sqrt(z - a) sqrt(z - b) with principal branches, a and b the
    support edges; this is the root with Im m > 0 above the real axis and the
    one continuous with it on the real line outside [a, b].
    """
    z = complex(z)
    if not (math.isfinite(c) and c > 0):
        raise ValidationError(f"concentration c must be > 0, got {c}")
    if z == 0:
        raise PoleError("Marchenko-Pastur transform has a pole at z = 0")
    a = (1.0 - math.sqrt(c)) ** 2
    b = (1.0 + math.sqrt(c)) ** 2
    root = cmath.sqrt(z - a) * cmath.sqrt(z - b)
    return (1.0 - c - z + root) / (2.0 * c * z)


def _finish(result, z: complex, which: Transform) -> StieltjesSolution:
    m = result.value
    if z.imag > 0 and not m.imag > 0:
        raise BranchError(f"{which.value} transform at z={z} converged to m={m} with Im m <= 0")
    return StieltjesSolution(z=z, m=m, residual=result.residual, iterations=result.iterations,
                             damping_used=result.damping, which=which)


def _inverse_support_bound(c: float, H: SpectrumSpec) -> float:
    """Upper bound on the spectra of S+ and S-: 1 / (tau_min (sqrt(c) - 1)^2)."""
    return 1.0 / (H.min_eigenvalue * (math.sqrt(c) - 1.0) ** 2)


def _underline_bound(c: float, H: SpectrumSpec) -> float:
    """Upper bound on the companion spectrum: tau_max (1 + sqrt(c))^2."""
    return H.max_eigenvalue * (1.0 + math.sqrt(c)) ** 2


def _admissible(m: complex, z: complex, bound: float, tol: float) -> bool:
    """
    Necessary conditions on the transform of a probability law on [0, L]:
    Im m >= Im z |m|^2 (Cauchy-Schwarz) and Im m >= Im z / (|z| + L)^2.
    The second rejects the root at m = 0; half of it is required.
    """
    if not m.imag > 0:
        return False
    if m.imag < z.imag * abs(m) ** 2 * (1.0 - 1e-6) - tol * max(1.0, abs(m)):
        return False
    return m.imag >= 0.5 * z.imag / (abs(z) + bound) ** 2


def _track_from_above(build_rhs, z: complex, c: float, H: SpectrumSpec, which: Transform,
                      bound: float, tol: float, max_iter: int) -> StieltjesSolution:
    """
    Follow the solution down the line Re w = Re z, from Im w far above the
    support, where -1/w is close to the transform and the other roots are far
    from it, to w = z. Steps are taken in ln Im w with a linear predictor and a
    Newton corrector. A step is retried at half the length when the corrector
    fails, lands on an inadmissible value or jumps away from the predictor.
    max_iter bounds the Newton iterations over the whole path.
    """
    what = f"{which.value} transform"
    x = z.real
    top = max(z.imag, Continuation.TOP_FACTOR * (abs(x) + bound))
    used = 0
    damping = 1.0

    def correct(w: complex, start: complex):
        nonlocal used, damping
        cap = min(SolverDefaults.STEP_NEWTON_ITER, max_iter - used)
        if cap < 1:
            raise DivergenceError(scaled_defect(build_rhs(w, c, H), start), used, what)
        try:
            result = newton_solve(build_rhs(w, c, H), start, tol=tol, max_iter=cap,
                                  admissible=lambda m: _admissible(m, w, bound, tol), what=what)
        except DivergenceError as e:
            used += e.iterations
            if used >= max_iter:
                raise DivergenceError(e.residual, used, what) from e
            raise
        used += result.iterations
        damping = min(damping, result.damping)
        return result

    w = complex(x, top) if top > z.imag else z
    result = correct(w, -1.0 / w)
    if not _admissible(result.value, w, bound, tol):
        raise BranchError(f"{what} has no admissible start at w={w}")
    m = result.value
    s, s_end = math.log(top), math.log(z.imag)
    h = Continuation.MAX_LOG_STEP
    slope = None

    while s > s_end:
        step = min(h, s - s_end)
        w_new = z if step == s - s_end else complex(x, math.exp(s - step))
        pred = m if slope is None else m - slope * step
        try:
            trial = correct(w_new, pred)
            accepted = (_admissible(trial.value, w_new, bound, tol)
                        and abs(trial.value - pred) <= Continuation.MAX_JUMP * max(abs(m), abs(trial.value)))
        except DivergenceError as e:
            if used >= max_iter:
                raise
            logger.debug("%s: corrector failed at w=%s (%s)", what, w_new, e)
            accepted = False
        if not accepted:
            h /= 2.0
            if h < Continuation.MIN_LOG_STEP:
                raise BranchError(f"{what} lost its branch on the way to z={z}")
            continue
        slope = (m - trial.value) / step
        m, s, result = trial.value, s - step, trial
        h = min(2.0 * h, Continuation.MAX_LOG_STEP)

    if not m.imag > 0:
        raise BranchError(f"{what} at z={z} converged to m={m} with Im m <= 0")
    return StieltjesSolution(z=z, m=m, residual=result.residual, iterations=used,
                             damping_used=damping, which=which)


def plus_rhs(z: complex, c: float, H: SpectrumSpec):
    """Right-hand side of the S+ equation as a function of m."""
    tau = H.eigenvalues
    base = 2.0 - 1.0 / c

    def rhs(m: complex) -> complex:
        return -(base + H.weighted_sum(1.0 / (z * tau * c * (z * m + 1.0) - 1.0))) / z
    return rhs


def minus_rhs(z: complex, c: float, H: SpectrumSpec):
    """Right-hand side of the S- equation as a function of m."""
    tau = H.eigenvalues

    def rhs(m: complex) -> complex:
        inner = 1.0 - c / (1.0 - c - c * z * m)
        return -1.0 / z - H.weighted_sum(1.0 / (tau * c * z * z * m * inner - 1.0)) / z
    return rhs


def underline_rhs(z: complex, c: float, H: SpectrumSpec):
    """Right-hand side of the companion equation m = 1 / (c int tau dH/(1 + tau m) - z)."""
    tau = H.eigenvalues

    def rhs(m: complex) -> complex:
        return 1.0 / (c * H.weighted_sum(tau / (1.0 + tau * m)) - z)
    return rhs


def solve_m_plus(z: complex, c: float, H: SpectrumSpec, tol: float = SolverDefaults.TOL,
                 max_iter: int = SolverDefaults.MAX_ITER) -> StieltjesSolution:
    """
    Limiting Stieltjes transform of the Moore-Penrose inverse S+.

    The S+ law is the atom 1 - 1/c at zero plus 1/c times the law of 1/lambda,
    lambda from the companion law, so m+(z) = -1/z - m_(1/z) / (c z^2). The
    companion equation has a single root in the upper half-plane; it is tracked
    at 1/conj(z) and the mapped value is polished on the S+ equation.
    """
    z = complex(z)
    _check_upper(z)
    _check_c(c)
    under = _track_from_above(underline_rhs, 1.0 / z.conjugate(), c, H, Transform.UNDERLINE,
                              _underline_bound(c, H), tol, max_iter)
    start = -1.0 / z - under.m.conjugate() / (c * z * z)
    bound = _inverse_support_bound(c, H)
    result = newton_solve(plus_rhs(z, c, H), start, tol=tol,
                          max_iter=min(SolverDefaults.STEP_NEWTON_ITER, max_iter),
                          admissible=lambda m: _admissible(m, z, bound, tol), what="plus transform")
    m = result.value
    if abs(m - start) > Continuation.DRIFT * max(1.0, abs(m)) or not _admissible(m, z, bound, tol):
        raise BranchError(f"plus transform at z={z} left the companion solution {start} for m={m}")
    return StieltjesSolution(z=z, m=m, residual=result.residual,
                             iterations=under.iterations + result.iterations,
                             damping_used=min(under.damping_used, result.damping), which=Transform.PLUS)


def solve_m_minus(z: complex, c: float, H: SpectrumSpec, tol: float = SolverDefaults.TOL,
                  max_iter: int = SolverDefaults.MAX_ITER) -> StieltjesSolution:
    """
    Limiting Stieltjes transform of the reflexive inverse S-.

    m = 0 solves this equation for every z, and between the zero atom and the
    bulk other roots lie close to the genuine one. The solution is therefore
    tracked down from far above the support instead of solved cold at z.
    """
    z = complex(z)
    _check_upper(z)
    _check_c(c)
    return _track_from_above(minus_rhs, z, c, H, Transform.MINUS, _inverse_support_bound(c, H), tol, max_iter)


def m_underline(z: complex, c: float, H: SpectrumSpec, tol: float = SolverDefaults.TOL,
                max_iter: int = SolverDefaults.MAX_ITER) -> StieltjesSolution:
    """
    Companion transform of (1/n) Y'Y. z may be real when it lies outside the
    support (e.g. z <= 0); the iteration then stays on the real line.
    """
    z = complex(z)
    if z.imag < 0:
        raise ValidationError(f"z must have Im z >= 0, got {z}")
    _check_c(c, lower=0.0)
    if z.imag > 0:
        return _track_from_above(underline_rhs, z, c, H, Transform.UNDERLINE, _underline_bound(c, H),
                                 tol, max_iter)
    start = 1.0 + 0j if z == 0 else -1.0 / z
    result = solve_fixed_point(underline_rhs(z, c, H), start, tol=tol, max_iter=max_iter,
                               what="companion transform")
    return _finish(result, z, Transform.UNDERLINE)


def m_underline_zero(c: float, H: SpectrumSpec, tol: float = SolverDefaults.ZERO_TOL) -> float:
    """
    Positive root of 1/m = c int tau dH(tau) / (1 + tau m).

    Solved on the increasing function g(m) = c int tau m dH / (1 + tau m) - 1
    by bracketing (lower end 1e-12, upper end grown geometrically) and then a
    Newton polish.
    """
    _check_c(c)
    tau, w = H.eigenvalues, H.weights

    def g(m: float) -> float:
        return c * float(w @ (tau * m / (1.0 + tau * m))) - 1.0

    def dg(m: float) -> float:
        return c * float(w @ (tau / (1.0 + tau * m) ** 2))

    lo, hi = 1e-12, 1.0
    grow = 0
    while g(hi) <= 0:
        hi *= 10.0
        grow += 1
        if grow > 60:
            raise BracketError(f"could not bracket the zero-point root for c={c}")
    if g(lo) >= 0:
        raise BracketError(f"zero-point defect is already nonnegative at m={lo}")

    sol = optimize.root_scalar(g, bracket=(lo, hi), method="brentq", xtol=1e-300, rtol=4 * np.finfo(float).eps)
    m0 = sol.root
    polished = optimize.root_scalar(g, x0=m0, fprime=dg, method="newton", xtol=1e-300, rtol=1e-15, maxiter=20)
    if polished.converged and polished.root > 0:
        m0 = polished.root

    defect = abs(c * float(w @ (tau / (1.0 + tau * m0))) - 1.0 / m0)
    if defect > tol * max(1.0, 1.0 / m0):
        raise DivergenceError(defect, sol.iterations, "zero-point solver")
    return float(m0)


def m_underline_zero_prime(c: float, H: SpectrumSpec, m0: float) -> float:
    """m'_F(0) = (1/m0^2 - c int tau^2 dH / (1 + tau m0)^2)^-1."""
    _check_c(c)
    if not m0 > 0:
        raise ValidationError(f"m0 must be positive, got {m0}")
    tau, w = H.eigenvalues, H.weights
    denom = 1.0 / m0 ** 2 - c * float(w @ (tau ** 2 / (1.0 + tau * m0) ** 2))
    if not denom > 0:
        raise ConditioningError(
            f"denominator {denom:.3g} of m'(0) is not positive (c={c} too close to 1 numerically)")
    return 1.0 / denom


def empirical_stieltjes(eigenvalues: Sequence[float], z: complex) -> complex:
    """(1/p) sum 1 / (lambda_i - z)."""
    z = complex(z)
    _check_upper(z)
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0:
        raise ValidationError("need at least one eigenvalue")
    return complex(np.mean(1.0 / (lam - z)))


def psi_transform(m_at_inv_z: complex, z: complex) -> complex:
    """Moment generating function Psi(z) = -(1/z) m(1/z) - 1 = sum_k mu_k z^k."""
    if z == 0:
        raise PoleError("psi_transform is undefined at z = 0")
    return -complex(m_at_inv_z) / complex(z) - 1.0


def solve_transform(which: Union[Transform, str], z: complex, c: float, H: Optional[SpectrumSpec] = None,
                    tol: float = SolverDefaults.TOL, max_iter: int = SolverDefaults.MAX_ITER) -> StieltjesSolution:
    """Solve any of the four transforms at z. H is ignored for the MP law."""
    which = Transform(which)
    z = complex(z)
    if which is Transform.MP:
        _check_upper(z)
        m = mp_stieltjes(z, c)
        return StieltjesSolution(z=z, m=m, residual=0.0, iterations=0, damping_used=1.0, which=which)
    if H is None:
        raise ValidationError(f"the {which.value} transform needs a population spectrum")
    solver = {Transform.PLUS: solve_m_plus, Transform.MINUS: solve_m_minus,
              Transform.UNDERLINE: m_underline}[which]
    return solver(z, c, H, tol=tol, max_iter=max_iter)


def defect(which: Union[Transform, str], z: complex, c: float, H: SpectrumSpec, m: complex) -> float:
    """Scaled fixed-point defect of m for the given transform."""
    build = {Transform.PLUS: plus_rhs, Transform.MINUS: minus_rhs,
             Transform.UNDERLINE: underline_rhs}[Transform(which)]
    return scaled_defect(build(complex(z), c, H), complex(m))


def zero_atom(which: Union[Transform, str], c: float) -> float:
    """Mass at zero: 1 - 1/c for the rank-deficient laws, none for the companion."""
    if Transform(which) is Transform.UNDERLINE:
        return 0.0
    return max(0.0, 1.0 - 1.0 / c)


def density_grid(which: Union[Transform, str], c: float, H: Optional[SpectrumSpec], x_grid: Sequence[float],
                 epsilon: float = SolverDefaults.DENSITY_EPSILON, include_atom: bool = False,
                 tol: float = SolverDefaults.TOL, max_iter: int = SolverDefaults.MAX_ITER) -> List[DensityPoint]:
    """
    Density by Stieltjes inversion, (1/pi) Im m(x + i eps), on a grid of
    positive x. The atom at zero is removed unless include_atom is set, so the
    curve integrates to the continuous mass. Every point is solved on its own
    path from above; failed points are reported with density None.
    """
    which = Transform(which)
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    xs = np.asarray(x_grid, dtype=float)
    if xs.ndim != 1 or np.any(xs <= 0):
        raise ValidationError("density grid must be a vector of positive reals")
    atom = 0.0 if include_atom else zero_atom(which, c)

    points = []
    for x in xs:
        z = complex(x, epsilon)
        try:
            sol = solve_transform(which, z, c, H, tol=tol, max_iter=max_iter)
        except NumericalError as e:
            logger.warning("density point x=%g marked missing: %s", x, e)
            points.append(DensityPoint(float(x), None))
            continue
        m = sol.m + atom / z
        points.append(DensityPoint(float(x), max(0.0, m.imag / math.pi)))
    return points


def gamma_transform(which: Union[Transform, str], z: complex, c: float, H: Optional[SpectrumSpec],
                    tol: float = SolverDefaults.TOL) -> complex:
    """
    Gamma(z) = m(1/z) / z. For z in the upper half-plane 1/z falls below the
    real axis and m(conj w) = conj m(w) is used.
    """
    z = complex(z)
    if z == 0:
        raise PoleError("Gamma is evaluated at z -> 0 through its limit, not at 0")
    w = 1.0 / z
    flip = w.imag < 0
    if flip:
        w = w.conjugate()
    m = solve_transform(which, w, c, H, tol=tol).m
    if flip:
        m = m.conjugate()
    return m / z


def series_moments(which: Union[Transform, str], c: float, H: SpectrumSpec, order: int = 2,
                   radius: Optional[float] = None, points: int = 64,
                   tol: float = 1e-13) -> np.ndarray:
    """
    First `order` moments of the limiting law, read off Psi(z) = -Gamma(z) - 1
    as Taylor coefficients by the trapezoidal Cauchy integral on |z| = radius.
    The default radius sits inside the disc 1/(largest eigenvalue), which is
    bounded below by tau_min (sqrt(c) - 1)^2.
    """
    which = Transform(which)
    _check_c(c)
    if order < 1:
        raise ValidationError(f"order must be positive, got {order}")
    if radius is None:
        radius = 0.5 * H.min_eigenvalue * (math.sqrt(c) - 1.0) ** 2
    # offset by half a step so no node lies on the real axis
    theta = 2.0 * np.pi * (np.arange(points) + 0.5) / points
    nodes = radius * np.exp(1j * theta)
    psi = np.array([-gamma_transform(which, zj, c, H, tol=tol) - 1.0 for zj in nodes])
    moments = [np.mean(psi * nodes ** -k).real for k in range(1, order + 1)]
    return np.array(moments)
