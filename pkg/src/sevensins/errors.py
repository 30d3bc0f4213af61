"""Exception hierarchy shared by all modules."""


class SevenSinsError(Exception):
    """Base class for every error raised by this package."""


class NonFinite(SevenSinsError, ValueError):
    pass


class NoConvergence(SevenSinsError, RuntimeError):
    pass


class NotPositiveDefinite(SevenSinsError, ValueError):
    pass


class DimensionMismatch(SevenSinsError, ValueError):
    pass


class NotSymmetric(SevenSinsError, ValueError):
    pass


class InsufficientData(SevenSinsError, ValueError):
    pass


class NotIndefinite(SevenSinsError, ValueError):
    """Raised when an exploit is requested for a matrix without negative eigenvalues."""


class KappaOutOfRange(SevenSinsError, ValueError):
    pass


class ZeroMu(SevenSinsError, ValueError):
    """The expected-return vector is identically zero, so the closed forms are undefined."""


class ZeroPosition(SevenSinsError, ValueError):
    pass


class CostsMissing(SevenSinsError, ValueError):
    pass


class ValidationError(SevenSinsError, ValueError):
    pass


class IterationLimit(SevenSinsError, RuntimeError):
    pass


class InfeasibleStart(SevenSinsError, RuntimeError):
    pass


class InvalidCovariance(SevenSinsError, RuntimeError):
    """Raised by the backtest when a covariance estimate is unusable and the policy is to halt.

    ``verdict`` carries the diagnosis verdict of the offending estimate.
    """

    def __init__(self, message: str, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class DataFormatError(SevenSinsError, ValueError):
    """An input file could not be parsed."""
