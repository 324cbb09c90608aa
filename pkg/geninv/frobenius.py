"""
Frobenius norms of S+ and S-: asymptotic equivalents, their finite-Sigma
plug-in versions, the normalized Frobenius loss (NFL) and the estimator of
(1/p)||Sigma^-1||_F^2 built on the reflexive inverse.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateMatrixError, ValidationError
from .matrixlab import CovarianceModel, InversePair, spectral_stats
from .spectrum import SpectrumSpec, inverse_moment
from .stieltjes import m_underline_zero, m_underline_zero_prime


@dataclass
class FrobeniusReport:
    """Empirical and asymptotic norms for one sample; all norms carry the 1/p factor."""
    c_eff: float
    fro_plus_emp: float
    fro_minus_emp: float
    fro_plus_asym: float
    fro_minus_asym: float
    nfl_emp: float
    nfl_asym: float
    trace_minus_emp: float
    trace_minus_asym: float
    precision_norm_estimate: float
    precision_norm_true: float


class CorollaryEquivalents(NamedTuple):
    fro_plus_equiv: float
    fro_minus_equiv: float
    m0: float


def _check_c(c: float):
    if not (math.isfinite(c) and c > 1):
        raise ValidationError(f"concentration c must be > 1 (p/n -> c > 1), got {c}")


def asymptotic_fro_plus(c: float, H: SpectrumSpec) -> float:
    """Limit of (1/p)||S+||_F^2, equal to m'_F(0) / c."""
    _check_c(c)
    m0 = m_underline_zero(c, H)
    return m_underline_zero_prime(c, H, m0) / c


def asymptotic_fro_minus(c: float, H: SpectrumSpec) -> float:
    """Limit of (1/p)||S-||_F^2."""
    _check_c(c)
    i1 = inverse_moment(H, 1)
    i2 = inverse_moment(H, 2)
    return (1.0 + c * (c - 1.0)) / (c ** 2 * (c - 1.0) ** 3) * i1 ** 2 + i2 / (c * (c - 1.0)) ** 2


def asymptotic_nfl(c: float, H: SpectrumSpec) -> float:
    return asymptotic_fro_minus(c, H) / asymptotic_fro_plus(c, H) - 1.0


def trace_limit_minus(c: float, H: SpectrumSpec) -> float:
    """Limit of (1/p) tr(S-)."""
    _check_c(c)
    return inverse_moment(H, 1) / (c * (c - 1.0))


def trace_limit_plus(c: float, H: SpectrumSpec) -> float:
    """Limit of (1/p) tr(S+), m_F(0) / c."""
    _check_c(c)
    return m_underline_zero(c, H) / c


def empirical_nfl(S_plus: np.ndarray, S_minus: np.ndarray) -> float:
    """||S-||_F^2 / ||S+||_F^2 - 1, equal to ||S- - S+||_F^2 / ||S+||_F^2."""
    S_plus = np.asarray(S_plus)
    S_minus = np.asarray(S_minus)
    if S_plus.shape != S_minus.shape:
        raise ValidationError(f"shape mismatch: {S_plus.shape} vs {S_minus.shape}")
    plus_sq = spectral_stats(S_plus).frobenius_sq
    if not plus_sq > 0:
        raise DegenerateMatrixError("||S+||_F is zero; the NFL is undefined")
    return spectral_stats(S_minus).frobenius_sq / plus_sq - 1.0


def _precision_estimate(fro_sq: float, trace: float, c: float, p: int) -> float:
    return (c * (c - 1.0)) ** 2 * (fro_sq - (1.0 / (c - 1.0) + c) * trace ** 2 / p) / p


def precision_fro_estimator(S_minus: np.ndarray, c_eff: float, p: int) -> float:
    """
    (1/p) (c(c-1))^2 [ ||S-||_F^2 - (1/(c-1) + c) (tr S-)^2 / p ], a consistent
    estimator of (1/p)||Sigma^-1||_F^2.
    """
    _check_c(c_eff)
    S_minus = np.asarray(S_minus)
    if S_minus.shape != (p, p):
        raise ValidationError(f"S- has shape {S_minus.shape}, expected ({p}, {p})")
    stats = spectral_stats(S_minus)
    return _precision_estimate(stats.frobenius_sq, stats.trace, c_eff, p)


def corollary_equivalents(sigma: CovarianceModel, c: float) -> CorollaryEquivalents:
    """
    Finite-p equivalents: the Frobenius limits evaluated on the exact
    discrete spectrum of the given Sigma, together with its plug-in m0.
    """
    _check_c(c)
    H_p = sigma.spectrum()
    m0 = m_underline_zero(c, H_p)
    return CorollaryEquivalents(
        fro_plus_equiv=m_underline_zero_prime(c, H_p, m0) / c,
        fro_minus_equiv=asymptotic_fro_minus(c, H_p),
        m0=m0,
    )


def frobenius_report(pair: InversePair, H: SpectrumSpec) -> FrobeniusReport:
    """Every FrobeniusReport field for one sample; asymptotics are taken at c_eff = p/n."""
    p, c = pair.p, pair.c_eff
    plus = spectral_stats(pair.S_plus)
    minus = spectral_stats(pair.S_minus)
    if not plus.frobenius_sq > 0:
        raise DegenerateMatrixError("||S+||_F is zero; the NFL is undefined")
    fro_plus_asym = asymptotic_fro_plus(c, H)
    fro_minus_asym = asymptotic_fro_minus(c, H)
    return FrobeniusReport(
        c_eff=c,
        fro_plus_emp=plus.frobenius_sq / p,
        fro_minus_emp=minus.frobenius_sq / p,
        fro_plus_asym=fro_plus_asym,
        fro_minus_asym=fro_minus_asym,
        nfl_emp=minus.frobenius_sq / plus.frobenius_sq - 1.0,
        nfl_asym=fro_minus_asym / fro_plus_asym - 1.0,
        trace_minus_emp=minus.trace / p,
        trace_minus_asym=trace_limit_minus(c, H),
        precision_norm_estimate=_precision_estimate(minus.frobenius_sq, minus.trace, c, p),
        precision_norm_true=pair.model.precision_fro_sq(),
    )
