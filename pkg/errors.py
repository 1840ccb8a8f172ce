"""
Exception hierarchy for the varsep-mor solvers.

Solvers raise these; validation helpers return diagnostics instead. The
command-line layer maps ConfigError to exit code 2 and every other
VarsepError to exit code 1.
"""

from typing import Optional


class VarsepError(Exception):
    """Base class for all solver and configuration failures."""


class InvalidArgumentError(VarsepError, ValueError):
    """An argument violates a documented precondition."""


class SingularMatrixError(VarsepError):
    """A linear system has a numerically zero pivot."""


class DegenerateModeError(VarsepError):
    """A separated factor collapsed to zero where a nonzero one is required."""


class NonConvergenceError(VarsepError):
    """An iteration hit its cap before meeting its tolerance.

    Attributes:
        last_increment: Value of the stopping quantity at the last iteration
        iterations: Number of iterations performed
    """

    def __init__(self, message: str, last_increment: float, iterations: int) -> None:
        super().__init__(message)
        self.last_increment = last_increment
        self.iterations = iterations


class OutOfRangeError(VarsepError, ValueError):
    """A parameter value lies outside its admissible interval."""


class UnsupportedError(VarsepError):
    """The requested feature is outside what the solvers implement."""


class IncompatibleBoundaryError(VarsepError):
    """Boundary data cannot be represented by the chosen reduction."""


class ConfigError(VarsepError):
    """A configuration file could not be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class StageFailure(VarsepError):
    """An experiment stage failed; wraps the underlying solver error."""

    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
