"""Exception hierarchy shared by the library and the command line."""


class CurveSegError(Exception):
    """Base class for all library errors."""


class DataError(CurveSegError, ValueError):
    """Input data is malformed or violates a container invariant."""


class CurveFormatError(DataError):
    """A curves file does not follow the expected layout."""


class ConfigurationError(CurveSegError, ValueError):
    """Requested model configuration cannot be fitted on the given data."""


class DomainError(CurveSegError, ValueError):
    """A basis was evaluated outside of its domain."""


class NumericalError(CurveSegError, ArithmeticError):
    """A computation produced non-finite values."""
