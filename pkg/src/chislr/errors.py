"""Exception hierarchy shared by every module."""


class ChislrError(Exception):
    """Base class for all package errors."""


class InvalidInput(ChislrError, ValueError):
    """An argument is outside its admissible domain (NaN, negative threshold, ...)."""


class DimensionMismatch(ChislrError, ValueError):
    """Operand shapes are inconsistent."""


class InvalidConfig(ChislrError, ValueError):
    """A configuration value or combination is not allowed."""


class NonFiniteIterate(ChislrError, ArithmeticError):
    """An iterative solver produced NaN or Inf.

    The residual history up to the failure is kept on ``history``.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class DataError(ChislrError):
    """Base class for dataset ingestion and construction failures."""


class MissingFrames(DataError):
    pass


class BadImageFormat(DataError):
    pass


class InconsistentDimensions(DataError):
    pass


class TooFewFrames(DataError):
    pass


class ZeroAtom(DataError):
    pass


class InsufficientData(DataError):
    pass


class BadMatrixFile(DataError, InvalidInput):
    """A matrix CSV file is malformed."""
