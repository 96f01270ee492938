"""Exception hierarchy shared by every module in the package."""


class DualQGANError(Exception):
    """Base class for all package errors."""


class SizeError(DualQGANError, ValueError):
    """Register or vector size outside the allowed range."""


class ValidationError(DualQGANError, ValueError):
    """An input object violates its invariants (non-unitary gate, non-CPTP channel, ...)."""


class QubitIndexError(DualQGANError, IndexError):
    """Duplicate or out-of-range qubit / variant index."""


class ArgumentError(DualQGANError, ValueError):
    """A scalar argument is outside its documented domain."""


class NumericError(DualQGANError, ArithmeticError):
    """Non-finite values appeared in a computation."""


class ParseError(DualQGANError, ValueError):
    """Malformed file content. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LoadError(DualQGANError):
    """A checkpoint or config file could not be loaded."""


class ConfigError(DualQGANError, ValueError):
    """Inconsistent or invalid run configuration."""
