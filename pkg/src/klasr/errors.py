"""Exception hierarchy shared by every module."""


class KlasrError(Exception):
    """Base class for all package errors."""


class SignalError(KlasrError, ValueError):
    """Input signal is malformed, too short, or degenerate."""


class FormatError(KlasrError, ValueError):
    """A file could not be parsed under its declared format."""


class NumericalError(KlasrError, ArithmeticError):
    """A numerical routine met a degenerate case it cannot recover from."""


class SingularMatrixError(NumericalError):
    """Matrix is singular to working precision."""


class ConfigError(KlasrError, ValueError):
    """Bad configuration key or value."""
