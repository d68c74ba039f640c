"""Exception hierarchy shared across the package.

Every error raised on purpose by the library derives from ``GSCError`` so
callers (and the CLI) can map families of failures onto exit codes.
"""


class GSCError(Exception):
    """Base class for library errors."""


class DomainError(GSCError, ValueError):
    """Input outside the mathematical domain of an operation."""


class PreconditionError(GSCError, ValueError):
    """Caller violated an operation's precondition (bad sizes, bad config)."""


class CapacityError(GSCError):
    """Request exceeds a desk-scale guard (dense Hessian size, memory)."""


class NumericalError(GSCError, ArithmeticError):
    """Numerical breakdown (e.g. CG curvature p'Ap <= 0)."""


class SingularityError(NumericalError):
    """Cholesky factorization failed on a matrix expected to be SPD."""


class NonConvergenceError(NumericalError):
    """Iteration budget exhausted. ``trace`` carries the partial record."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StepSizeError(NumericalError):
    """First-order baseline diverged; the step size is too large."""


class DataError(GSCError):
    """Base class for ingestion problems."""


class ParseError(DataError):
    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
        if line is not None:
            loc = f"{loc}:{line}" if loc else f"line {line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


class SchemaError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class FormatError(DataError):
    """Binary model file is malformed or of an unsupported kind."""
