"""Exception hierarchy shared by every module of the package."""
from __future__ import annotations


class ExtremalIndexError(ValueError):
    """Base class for all errors raised by the package."""


class InvalidConfigError(ExtremalIndexError):
    """A tuning parameter (block size, tau, process parameter, ...) is out of range."""


class InsufficientDataError(ExtremalIndexError):
    """The series is too short for the requested computation."""


class InsufficientExceedancesError(ExtremalIndexError):
    """Fewer threshold exceedances than the estimator needs."""


class DegenerateThresholdError(ExtremalIndexError):
    """The threshold makes a block estimator undefined.

    ``statistic`` names the offending quantity (``"fhat"`` or ``"tau_hat"``)
    and ``value`` holds its value, so callers can decide which way to move
    the threshold.
    """

    def __init__(self, message: str, statistic: str, value: float):
        super().__init__(message)
        self.statistic = statistic
        self.value = value
