"""Exception hierarchy for geninv."""

from typing import Optional


class GeninvError(Exception):
    """Base class for all geninv errors."""
    kind = "error"


class ValidationError(GeninvError, ValueError):
    """Input outside the documented domain."""
    kind = "validation"


class NumericalError(GeninvError, ArithmeticError):
    """A computation could not produce a trustworthy number."""
    kind = "numerical"


class PoleError(NumericalError):
    kind = "pole"


class SingularGramError(NumericalError):
    """The n x n Gram matrix is singular or too badly conditioned to invert."""
    kind = "singular_gram"

    def __init__(self, smallest_eigenvalue: float, condition: float):
        self.smallest_eigenvalue = smallest_eigenvalue
        self.condition = condition
        super().__init__(
            f"Gram matrix is singular: smallest eigenvalue {smallest_eigenvalue:.6g}, "
            f"condition number {condition:.6g}"
        )


class DivergenceError(NumericalError):
    """Fixed-point iteration did not reach tolerance."""
    kind = "divergence"

    def __init__(self, residual: float, iterations: int, what: str = "fixed-point iteration"):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{what} did not converge after {iterations} iterations (residual {residual:.3g})")


class BranchError(NumericalError):
    """Converged to a value that is not a Stieltjes transform (Im m <= 0 while Im z > 0)."""
    kind = "branch"


class ConditioningError(NumericalError):
    kind = "conditioning"


class BracketError(NumericalError):
    kind = "bracket"


class DegenerateMatrixError(NumericalError):
    kind = "degenerate"


class DataFileError(GeninvError, OSError):
    """Unreadable or malformed matrix file."""
    kind = "io"

    def __init__(self, path: str, message: str, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")
