"""Protocol constants and enums shared across the geninv modules."""

from enum import Enum, IntEnum


class Noise(str, Enum):
    """Noise laws with zero mean and unit variance."""
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIFORM = "uniform"

    @classmethod
    def parse(cls, text: str) -> "Noise":
        key = text.strip().lower()
        if key == "uniform-scaled":
            key = "uniform"
        try:
            return cls(key)
        except ValueError:
            from .errors import ValidationError
            names = ", ".join(n.value for n in cls)
            raise ValidationError(f"unknown noise '{text}' (expected one of: {names})") from None


class Transform(str, Enum):
    """Limiting Stieltjes transforms the solvers know about."""
    PLUS = "plus"            # Moore-Penrose inverse S+
    MINUS = "minus"          # reflexive inverse S-
    MP = "mp"                # Marchenko-Pastur law
    UNDERLINE = "underline"  # companion (1/n) Y'Y


class ExitCode(IntEnum):
    """CLI exit codes."""
    OK = 0
    VALIDATION = 1
    NUMERICAL = 2
    IO = 3


class SolverDefaults:
    """Numerical defaults."""
    TOL = 1e-10
    MAX_ITER = 10_000
    MIN_DAMPING = 1.0 / 64.0
    NEWTON_THRESHOLD = 1e-2
    ZERO_TOL = 1e-13
    DENSITY_EPSILON = 1e-3
    STEP_NEWTON_ITER = 30


class Continuation:
    """Path-following settings: z is reached from far above along Re w = Re z."""
    TOP_FACTOR = 4.0        # start at Im w >= TOP_FACTOR (|Re z| + support bound)
    MAX_LOG_STEP = 0.6931471805599453   # ln 2 in s = ln Im w
    MIN_LOG_STEP = 1e-6
    MAX_JUMP = 0.3          # relative predictor-corrector gap that rejects a step
    DRIFT = 1e-6            # allowed change when polishing a mapped solution


class Tolerances:
    """Validation tolerances."""
    WEIGHT_SUM = 1e-12
    WEIGHT_RESCALE = 1e-9
    SYMMETRY = 1e-10
    GRAM_CONDITION = 1e12
    C_EFF_BAND = 0.10
