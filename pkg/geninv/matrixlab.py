"""Observation model, sample covariance and the two generalized inverses."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from .errors import DataFileError, SingularGramError, ValidationError
from .protocol import Noise, Tolerances
from .spectrum import SpectrumSpec, apportion, canonicalize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    """
    One simulation configuration. n = round(p / c) and the effective
    concentration c_eff = p / n is what the asymptotic formulas are fed.
    """
    p: int
    c: float
    spectrum: SpectrumSpec
    noise: Noise = Noise.GAUSSIAN
    seed: int = 0
    n: int = field(init=False)
    c_eff: float = field(init=False)

    def __post_init__(self):
        if self.p < 2:
            raise ValidationError(f"p must be at least 2, got {self.p}")
        if not self.c > 1:
            raise ValidationError(f"concentration c must be > 1 (p/n -> c > 1), got {self.c}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        n = max(1, int(round(self.p / self.c)))
        if n >= self.p:
            raise ValidationError(f"n = round(p/c) = {n} is not smaller than p = {self.p}")
        c_eff = self.p / n
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "c_eff", c_eff)
        if abs(c_eff - self.c) > Tolerances.C_EFF_BAND * self.c:
            logger.warning("p=%d, c=%g gives n=%d and c_eff=%.4g, more than 10%% off target",
                           self.p, self.c, n, c_eff)

    def covariance(self) -> "CovarianceModel":
        return CovarianceModel.from_spectrum(self.spectrum, self.p)


class CovarianceModel:
    """
    Population covariance Sigma with cached powers.
    Diagonal models store only the eigenvalue vector; dense models keep the
    eigendecomposition and build Sigma^(1/2), Sigma^(-1/2), Sigma^(-1) from it.
    """

    def __init__(self, eigenvalues: np.ndarray, eigenvectors: Optional[np.ndarray] = None):
        tau = np.asarray(eigenvalues, dtype=float)
        if tau.ndim != 1 or tau.size == 0:
            raise ValidationError("eigenvalues must be a nonempty vector")
        if np.any(tau <= 0) or not np.all(np.isfinite(tau)):
            raise ValidationError("covariance must be positive definite")
        self.p = tau.size
        self.eigenvalues = tau
        self.eigenvectors = eigenvectors
        if eigenvectors is None:
            self.matrix = np.diag(tau)
            self.sqrt = np.diag(np.sqrt(tau))
            self.inv_sqrt = np.diag(1.0 / np.sqrt(tau))
            self.inverse = np.diag(1.0 / tau)
        else:
            V = eigenvectors
            self.matrix = _symmetrize((V * tau) @ V.T)
            self.sqrt = _symmetrize((V * np.sqrt(tau)) @ V.T)
            self.inv_sqrt = _symmetrize((V / np.sqrt(tau)) @ V.T)
            self.inverse = _symmetrize((V / tau) @ V.T)

    @property
    def is_diagonal(self) -> bool:
        return self.eigenvectors is None

    @classmethod
    def identity(cls, p: int) -> "CovarianceModel":
        return cls(np.ones(p))

    @classmethod
    def from_spectrum(cls, spec: SpectrumSpec, p: int) -> "CovarianceModel":
        """Diagonal Sigma with atom counts apportioned by largest remainder."""
        counts = apportion(spec.weights, p)
        return cls(np.repeat(spec.eigenvalues, counts))

    @classmethod
    def from_matrix(cls, sigma: np.ndarray) -> "CovarianceModel":
        sigma = np.asarray(sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValidationError(f"covariance must be square, got shape {sigma.shape}")
        _check_symmetric(sigma)
        tau, V = linalg.eigh(sigma)
        if tau[0] <= 0:
            raise ValidationError(f"covariance is not positive definite (smallest eigenvalue {tau[0]:.3g})")
        return cls(tau, V)

    def apply_sqrt(self, X: np.ndarray) -> np.ndarray:
        if self.is_diagonal:
            return np.sqrt(self.eigenvalues)[:, None] * X
        return self.sqrt @ X

    def apply_inv_sqrt_both(self, A: np.ndarray) -> np.ndarray:
        """Sigma^(-1/2) A Sigma^(-1/2)."""
        if self.is_diagonal:
            d = 1.0 / np.sqrt(self.eigenvalues)
            return d[:, None] * A * d[None, :]
        return self.inv_sqrt @ A @ self.inv_sqrt

    def spectrum(self) -> SpectrumSpec:
        """Exact discrete spectrum of this finite Sigma (mass 1/p per eigenvalue)."""
        return canonicalize([(1.0, t) for t in self.eigenvalues], label=f"Sigma(p={self.p})")

    def precision_fro_sq(self) -> float:
        """(1/p) ||Sigma^-1||_F^2."""
        return float(np.mean(self.eigenvalues ** -2.0))


@dataclass
class InversePair:
    """S, its Moore-Penrose inverse and the reflexive inverse, plus the Sigma that built them."""
    S: np.ndarray
    S_plus: np.ndarray
    S_minus: np.ndarray
    gram_eigen_floor: float
    model: CovarianceModel
    n: int

    @property
    def p(self) -> int:
        return self.S.shape[0]

    @property
    def c_eff(self) -> float:
        return self.p / self.n


class SpectralStats(NamedTuple):
    trace: float
    frobenius_sq: float
    eigenvalues: np.ndarray


class PenroseResiduals(NamedTuple):
    agag: float
    gaga: float
    ag_sym: float
    ga_sym: float


def _symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def _check_symmetric(A: np.ndarray, tol: float = Tolerances.SYMMETRY):
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    asym = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    if asym > tol * scale:
        raise ValidationError(f"matrix is not symmetric (max asymmetry {asym:.3g})")


def sample_noise(p: int, n: int, noise: Union[Noise, str], seed: int) -> np.ndarray:
    """p x n i.i.d. entries with mean 0 and variance 1, deterministic in (seed, p, n, noise)."""
    if p < 1 or n < 1:
        raise ValidationError(f"noise dimensions must be positive, got {p} x {n}")
    noise = noise if isinstance(noise, Noise) else Noise.parse(noise)
    rng = np.random.default_rng(seed)
    if noise is Noise.GAUSSIAN:
        return rng.standard_normal((p, n))
    if noise is Noise.RADEMACHER:
        return 2.0 * rng.integers(0, 2, size=(p, n)).astype(float) - 1.0
    half_width = math.sqrt(3.0)
    return rng.uniform(-half_width, half_width, size=(p, n))


def build_observations(model: CovarianceModel, X: np.ndarray) -> np.ndarray:
    """Y = Sigma^(1/2) X."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != model.p:
        raise ValidationError(f"noise matrix has shape {X.shape}, expected ({model.p}, n)")
    return model.apply_sqrt(X)


def sample_covariance(Y: np.ndarray) -> np.ndarray:
    """S = (1/n) Y Y'."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise ValidationError(f"observations must be a p x n matrix with n >= 1, got {Y.shape}")
    return _symmetrize(Y @ Y.T / Y.shape[1])


def _gram_pinv(Y: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    (1/n) Y G^-2 Y' with G = (1/n) Y'Y, through the n x n eigendecomposition of G.
    Returns the p x p result and the smallest eigenvalue of G.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValidationError(f"expected a matrix, got shape {Y.shape}")
    n = Y.shape[1]
    G = _symmetrize(Y.T @ Y / n)
    w, V = linalg.eigh(G)
    floor = float(w[0])
    top = float(w[-1])
    if floor <= 0 or top / floor > Tolerances.GRAM_CONDITION:
        condition = top / floor if floor > 0 else float("inf")
        raise SingularGramError(floor, condition)
    B = Y @ V
    result = (B / w ** 2) @ B.T / n
    return _symmetrize(result), floor


def moore_penrose_inverse(Y: np.ndarray) -> np.ndarray:
    """S+ = (1/n) Y ((1/n) Y'Y)^-2 Y'."""
    return _gram_pinv(Y)[0]


def reflexive_inverse(model: CovarianceModel, X: np.ndarray) -> np.ndarray:
    """
    S- = Sigma^(-1/2) [(1/n) X X']^+ Sigma^(-1/2).
    Needs the population Sigma, so it only exists inside simulations.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != model.p:
        raise ValidationError(f"noise matrix has shape {X.shape}, expected ({model.p}, n)")
    A_plus, _ = _gram_pinv(X)
    return _symmetrize(model.apply_inv_sqrt_both(A_plus))


def build_inverse_pair(model: CovarianceModel, X: np.ndarray) -> InversePair:
    Y = build_observations(model, X)
    S_plus, floor = _gram_pinv(Y)
    return InversePair(
        S=sample_covariance(Y),
        S_plus=S_plus,
        S_minus=reflexive_inverse(model, X),
        gram_eigen_floor=floor,
        model=model,
        n=X.shape[1],
    )


def spectral_stats(A: np.ndarray) -> SpectralStats:
    """Trace, tr(A^2) and descending eigenvalues of a symmetric matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    _check_symmetric(A)
    eig = linalg.eigvalsh(_symmetrize(A))[::-1]
    return SpectralStats(
        trace=float(np.trace(A)),
        frobenius_sq=float(np.sum(eig ** 2)),
        eigenvalues=eig,
    )


def _rel(num: np.ndarray, den: np.ndarray) -> float:
    d = np.linalg.norm(den)
    return float(np.linalg.norm(num) / d) if d > 0 else float(np.linalg.norm(num))


def penrose_residuals(A: np.ndarray, G: np.ndarray) -> PenroseResiduals:
    """Relative residuals of the four Penrose conditions for G as an inverse of A."""
    AG = A @ G
    GA = G @ A
    return PenroseResiduals(
        agag=_rel(AG @ A - A, A),
        gaga=_rel(GA @ G - G, G),
        ag_sym=_rel(AG.T - AG, AG),
        ga_sym=_rel(GA.T - GA, GA),
    )


def load_matrix(path: Union[str, Path]) -> np.ndarray:
    """Read a whitespace-separated real matrix; blank lines and '#' comments are skipped."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataFileError(str(path), e.strerror or str(e)) from e

    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            row = [float(tok) for tok in line.split()]
        except ValueError:
            raise DataFileError(str(path), "non-numeric entry", lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise DataFileError(str(path), "non-finite entry", lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataFileError(str(path), f"expected {width} columns, found {len(row)}", lineno)
        rows.append(row)

    if not rows:
        raise DataFileError(str(path), "file holds no matrix rows")
    return np.array(rows, dtype=float)
