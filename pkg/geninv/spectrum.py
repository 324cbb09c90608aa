"""Discrete population spectral distributions H and integrals against them."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import PoleError, ValidationError
from .protocol import Tolerances

logger = logging.getLogger(__name__)

Atom = Tuple[float, float]
Scalar = Union[float, complex]

PRESETS = {
    "identity": ((1.0, 1.0),),
    "figure1": ((0.2, 1.0), (0.4, 3.0), (0.4, 10.0)),
}


@dataclass(frozen=True)
class SpectrumSpec:
    """
    Finite mixture of point masses: atoms are (weight, eigenvalue) pairs.
    Use canonicalize() to build one from raw input.
    """
    atoms: Tuple[Atom, ...]
    label: Optional[str] = None
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.atoms:
            raise ValidationError("spectrum needs at least one atom")
        w = np.array([a[0] for a in self.atoms], dtype=float)
        t = np.array([a[1] for a in self.atoms], dtype=float)
        if np.any(w <= 0) or np.any(w > 1):
            raise ValidationError(f"atom weights must lie in (0, 1]: {self.atoms}")
        if np.any(t <= 0) or not np.all(np.isfinite(t)):
            raise ValidationError(f"eigenvalues must be positive and finite: {self.atoms}")
        if abs(w.sum() - 1.0) > Tolerances.WEIGHT_SUM:
            raise ValidationError(f"weights sum to {w.sum():.15g}, not 1")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("eigenvalues must be strictly increasing")
        w.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "eigenvalues", t)

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1])

    def weighted_sum(self, values) -> Scalar:
        """Sum of w_i * values_i, where values are evaluated at each atom in order."""
        v = np.asarray(values)
        if v.shape != self.weights.shape:
            raise ValidationError(f"expected {len(self)} values, got shape {v.shape}")
        bad = ~np.isfinite(v)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise PoleError(
                f"integrand is not finite at atom {i} "
                f"(weight {self.weights[i]:g}, eigenvalue {self.eigenvalues[i]:g})"
            )
        total = self.weights @ v
        return complex(total) if np.iscomplexobj(total) else float(total)

    def moment(self, k: int) -> float:
        """Integral of tau^k dH(tau) for any integer k."""
        return float(self.weights @ self.eigenvalues ** float(k))

    def to_text(self) -> str:
        return ",".join(f"{w:.17g}:{t:.17g}" for w, t in self.atoms)


def canonicalize(raw_atoms: Iterable[Sequence[float]], label: Optional[str] = None) -> SpectrumSpec:
    """
    Normalize weights to sum 1, merge duplicate eigenvalues, sort ascending.
    Weights are treated as relative proportions.
    """
    atoms = [tuple(a) for a in raw_atoms]
    if not atoms:
        raise ValidationError("spectrum needs at least one atom")

    merged = {}
    for i, atom in enumerate(atoms):
        if len(atom) != 2:
            raise ValidationError(f"atom {i} must be a (weight, eigenvalue) pair, got {atom}")
        w, t = float(atom[0]), float(atom[1])
        if not (math.isfinite(w) and w > 0):
            raise ValidationError(f"atom {i} has nonpositive weight: ({w:g}, {t:g})")
        if not (math.isfinite(t) and t > 0):
            raise ValidationError(f"atom {i} has nonpositive eigenvalue: ({w:g}, {t:g})")
        merged[t] = merged.get(t, 0.0) + w

    total = math.fsum(merged.values())
    if abs(total - 1.0) > Tolerances.WEIGHT_RESCALE:
        logger.warning("spectrum weights sum to %.6g; rescaling to 1", total)

    canonical = tuple((w / total, t) for t, w in sorted(merged.items()))
    # Renormalize once more so the stored weights sum to 1 within rounding
    fix = math.fsum(w for w, _ in canonical)
    canonical = tuple((w / fix, t) for w, t in canonical)
    return SpectrumSpec(atoms=canonical, label=label)


def identity_spectrum() -> SpectrumSpec:
    return canonicalize(PRESETS["identity"], label="identity")


def figure1_spectrum() -> SpectrumSpec:
    """20% of eigenvalues at 1, 40% at 3, 40% at 10."""
    return canonicalize(PRESETS["figure1"], label="figure1")


def parse_spectrum(text: str) -> SpectrumSpec:
    """
    Parse 'weight:eigenvalue' pairs, e.g. '0.2:1,0.4:3,0.4:10',
    or a preset name ('identity', 'figure1').
    """
    text = text.strip()
    if text.lower() in PRESETS:
        return canonicalize(PRESETS[text.lower()], label=text.lower())

    atoms = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2:
            raise ValidationError(f"bad spectrum atom '{chunk}' (expected weight:eigenvalue)")
        try:
            atoms.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ValidationError(f"bad spectrum atom '{chunk}' (not a number)") from None
    return canonicalize(atoms, label=text)


def integrate(spec: SpectrumSpec, f: Callable[[float], Scalar]) -> Scalar:
    """Exact integral of f against H: sum_i w_i f(tau_i)."""
    values = []
    for i, tau in enumerate(spec.eigenvalues):
        try:
            values.append(f(float(tau)))
        except ZeroDivisionError:
            raise PoleError(f"integrand has a pole at atom {i} (eigenvalue {tau:g})") from None
    return spec.weighted_sum(np.array(values))


def inverse_moment(spec: SpectrumSpec, k: int) -> float:
    """Integral of tau^-k dH(tau), k in {1, 2}."""
    if k not in (1, 2):
        raise ValidationError(f"inverse_moment supports k in {{1, 2}}, got {k}")
    return float(integrate(spec, lambda tau: tau ** -k))


def apportion(weights: Sequence[float], p: int) -> np.ndarray:
    """Largest-remainder integer counts for the atoms, summing to p."""
    if p < 1:
        raise ValidationError(f"p must be positive, got {p}")
    w = np.asarray(weights, dtype=float)
    quotas = w * p
    counts = np.floor(quotas).astype(int)
    short = p - int(counts.sum())
    if short > 0:
        # stable sort keeps ties in atom order
        order = np.argsort(-(quotas - counts), kind="stable")
        counts[order[:short]] += 1
    return counts
