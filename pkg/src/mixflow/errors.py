"""Exception hierarchy shared by the thermodynamic and solver modules."""


class MixflowError(Exception):
    """Base class for all errors raised by :mod:`mixflow`."""


class DomainError(MixflowError, ValueError):
    """Raised when an input lies outside the admissible state domain."""


class ConvergenceError(MixflowError, RuntimeError):
    """Raised when an iterative root finder fails to converge."""


class ConsistencyError(MixflowError, RuntimeError):
    """Raised when a computed quantity violates a thermodynamic sign condition."""


class OverflowGuardError(MixflowError, FloatingPointError):
    """Raised when an exponent argument leaves the representable range."""


class ValidationError(MixflowError, ValueError):
    """Raised when model parameters or user-supplied matrices are invalid."""
