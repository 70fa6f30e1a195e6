"""Exception hierarchy shared by every horizonlab module."""


class HorizonLabError(Exception):
    """Base class for all library errors."""


class DimensionError(HorizonLabError, ValueError):
    """Mismatched or empty dimensions."""


class ContractViolation(HorizonLabError, ValueError):
    """An operation precondition does not hold for the given input."""


class DegenerateInputError(HorizonLabError, ValueError):
    """Input is degenerate (zero vector, zero separation, ...)."""


class DomainError(HorizonLabError, ArithmeticError):
    """Arithmetic outside the operation's domain (division by zero, ...)."""


class InsufficientDataError(HorizonLabError, ValueError):
    """Too few samples, or too narrow a range, for the requested analysis."""


class ConvergenceError(HorizonLabError, ArithmeticError):
    """An iterative solver failed to converge."""


class ReferenceQualityError(ConvergenceError):
    """Reference spectrum is not converged well enough for a convergence study."""


class CapacityError(HorizonLabError, MemoryError):
    """Requested problem size exceeds the configured memory budget."""


class SaturationError(HorizonLabError, ValueError):
    """Trajectory separation saturates too early to fit a growth law."""


class ValidationError(HorizonLabError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class FormatError(HorizonLabError, ValueError):
    """Missing or malformed CSV input."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column
