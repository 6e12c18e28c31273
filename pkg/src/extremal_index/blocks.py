"""Finite-sample block statistics and extremal index estimators.

Conventions used throughout:

* an observation *exceeds* ``u`` when ``x > u`` (ties are not exceedances);
* a block maximum is *below* ``u`` when ``M <= u``;
* disjoint blocks cover positions ``1..r*k`` with ``k = n // r``; the trailing
  remainder is dropped, both for the disjoint maxima and for ``tau_hat``;
* sliding blocks are the ``n - r + 1`` windows ``(i+1, ..., i+r)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from numba import njit

from .errors import (
    DegenerateThresholdError,
    InsufficientDataError,
    InsufficientExceedancesError,
    InvalidConfigError,
)

Scheme = Literal["disjoint", "sliding"]
SCHEMES: tuple[str, ...] = ("disjoint", "sliding")


@dataclass(frozen=True)
class TimeSeries:
    """A finite stretch of observations plus where it came from."""

    values: np.ndarray
    source: str = ""
    negated: bool = False

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise InvalidConfigError("a time series needs at least one observation")
        if not np.all(np.isfinite(values)):
            raise InvalidConfigError("time series values must be finite (no NaN or inf)")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n


def as_array(series) -> np.ndarray:
    """Return the observations of ``series`` as a validated float array."""
    if isinstance(series, TimeSeries):
        return series.values
    return TimeSeries(series).values


@dataclass(frozen=True)
class BlockConfig:
    """Block size ``r`` and threshold ``u`` for a series of length ``n``."""

    n: int
    r: int
    u: float = math.nan

    def __post_init__(self):
        check_block_size(self.n, self.r)

    @property
    def k(self) -> int:
        return self.n // self.r


def check_block_size(n: int, r: int) -> int:
    """Validate ``1 <= r <= n`` and return the disjoint block count ``k``."""
    if int(r) != r or r < 1:
        raise InvalidConfigError(f"block size must be a positive integer, got r={r}")
    if r > n:
        raise InvalidConfigError(f"block size r={r} exceeds series length n={n}")
    return n // int(r)


@njit(cache=True)
def _sliding_max(x, r):
    # monotone deque of indices; values along the deque are non-increasing
    n = x.shape[0]
    out = np.empty(n - r + 1)
    dq = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    for i in range(n):
        while tail > head and x[dq[tail - 1]] <= x[i]:
            tail -= 1
        dq[tail] = i
        tail += 1
        if dq[head] <= i - r:
            head += 1
        if i >= r - 1:
            out[i - r + 1] = x[dq[head]]
    return out


def block_maxima(series, r: int, scheme: Scheme = "sliding") -> np.ndarray:
    """Maxima of disjoint blocks or of sliding windows of length ``r``.

    The sliding maxima use a monotone queue and run in O(n) time.
    """
    x = as_array(series)
    k = check_block_size(x.size, r)
    if scheme == "disjoint":
        return x[: r * k].reshape(k, r).max(axis=1)
    if scheme == "sliding":
        return _sliding_max(x, int(r))
    raise InvalidConfigError(f"unknown scheme {scheme!r}")


def window_exceedance_counts(series, r: int, u: float) -> np.ndarray:
    """Number of exceedances of ``u`` in each of the ``n - r + 1`` sliding windows."""
    x = as_array(series)
    check_block_size(x.size, r)
    csum = np.concatenate(([0], np.cumsum(x > u)))
    return csum[r:] - csum[:-r]


def fhat(series, r: int, u: float, scheme: Scheme = "sliding") -> float:
    """Empirical distribution function of the block maximum evaluated at ``u``."""
    return float(np.mean(block_maxima(series, r, scheme) <= u))


def tau_hat(series, r: int, u: float) -> float:
    """Mean number of exceedances per disjoint block (first ``r*k`` positions only)."""
    x = as_array(series)
    k = check_block_size(x.size, r)
    return float(np.count_nonzero(x[: r * k] > u)) / k


def sliding_excess_variance(series, r: int, u: float) -> tuple[float, float]:
    """Mean and variance of the sliding-window exceedance counts.

    The sum of squared deviations is divided by ``n - 2r + 1`` rather than
    ``n - r``; this reduces the bias to O(1/k^2) for iid data.

    Returns
    -------
    (nbar, sigma2_hat)
    """
    x = as_array(series)
    n = x.size
    check_block_size(n, r)
    if n < 2 * r:
        raise InsufficientDataError(
            f"the sliding variance needs n >= 2r (got n={n}, r={r})")
    counts = window_exceedance_counts(x, r, u).astype(float)
    nbar = counts.mean()
    sigma2 = float(np.sum((counts - nbar) ** 2)) / (n - 2 * r + 1)
    return float(nbar), sigma2


def select_threshold(series, r: int, tau: float) -> float:
    """The ``floor(k*tau)``-th largest observation, with the rank clamped to ``[1, n]``."""
    x = as_array(series)
    k = check_block_size(x.size, r)
    if not tau > 0:
        raise InvalidConfigError(f"tau must be positive, got {tau}")
    m = min(max(int(math.floor(k * tau)), 1), x.size)
    return float(np.partition(x, x.size - m)[x.size - m])


@dataclass(frozen=True)
class BlockStats:
    """Everything the estimators need from one ``(r, u)`` pass over the data.

    ``c2_hat`` is NaN when it cannot be formed (``n < 2r`` or a degenerate
    sliding estimate); ``sigma2_hat`` and ``nbar`` are NaN when ``n < 2r``.
    """

    n: int
    r: int
    k: int
    u: float
    f_dj: float
    f_sl: float
    tau_hat: float
    n_exceed: int
    nbar: float
    sigma2_hat: float
    c2_hat: float

    @property
    def c2_floored(self) -> float:
        return max(self.c2_hat, 0.0)

    def fhat(self, scheme: str) -> float:
        return self.f_dj if scheme == "disjoint" else self.f_sl


def _raw_theta(f: float, tau: float) -> float:
    if f <= 0.0:
        raise DegenerateThresholdError(
            "every block maximum exceeds the threshold (fhat = 0); use a larger u",
            "fhat", f)
    if tau <= 0.0:
        raise DegenerateThresholdError(
            "no observation exceeds the threshold (tau_hat = 0); use a smaller u",
            "tau_hat", tau)
    return -math.log(f) / tau


def block_stats(series, r: int, u: float) -> BlockStats:
    """Compute disjoint and sliding block statistics at block size ``r`` and threshold ``u``."""
    x = as_array(series)
    n = x.size
    k = check_block_size(n, r)
    r = int(r)
    exceed = x > u
    n_exceed_rk = int(np.count_nonzero(exceed[: r * k]))
    tau = n_exceed_rk / k
    f_dj = float(np.mean(x[: r * k].reshape(k, r).max(axis=1) <= u))
    # a sliding maximum is <= u exactly when its window has no exceedance
    csum = np.concatenate(([0], np.cumsum(exceed)))
    counts = (csum[r:] - csum[:-r]).astype(float)
    f_sl = float(np.mean(counts == 0))
    nbar = sigma2 = c2 = math.nan
    if n >= 2 * r:
        nbar = float(counts.mean())
        sigma2 = float(np.sum((counts - nbar) ** 2)) / (n - 2 * r + 1)
        if f_sl > 0 and tau > 0:
            c2 = _raw_theta(f_sl, tau) / tau * sigma2 - 1.0
    return BlockStats(n=n, r=r, k=k, u=float(u), f_dj=f_dj, f_sl=f_sl,
                      tau_hat=tau, n_exceed=int(np.count_nonzero(exceed)),
                      nbar=nbar, sigma2_hat=sigma2, c2_hat=c2)


def c2_hat(series, r: int, u: float) -> float:
    """Sliding-blocks estimate of the squared coefficient of variation of cluster sizes.

    Returned unclipped; it can be negative at finite samples.
    """
    stats = block_stats(series, r, u)
    if stats.n < 2 * r:
        raise InsufficientDataError(
            f"c2_hat needs n >= 2r (got n={stats.n}, r={r})")
    theta_sl = _raw_theta(stats.f_sl, stats.tau_hat)
    return theta_sl / stats.tau_hat * stats.sigma2_hat - 1.0


@dataclass(frozen=True)
class ThetaEstimate:
    """Output of one extremal index estimator.

    ``theta_corrected``/``theta_corrected_raw`` and the confidence interval
    fields stay ``None`` until :func:`~extremal_index.asymptotics.bias_corrected`
    and :func:`~extremal_index.asymptotics.confidence_interval` fill them in.
    """

    mode: str
    theta_raw: float
    k: int
    u: float
    stats: Optional[BlockStats] = None
    tau: float = math.nan
    correction: float = 0.0
    theta_corrected: Optional[float] = None
    theta_corrected_raw: Optional[float] = None
    correction_floored: bool = False
    ci: Optional[tuple[float, float]] = None
    ci_raw: Optional[tuple[float, float]] = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def theta_clipped(self) -> float:
        return min(self.theta_raw, 1.0)

    @property
    def theta(self) -> float:
        """Headline value: corrected if a correction was applied, else clipped."""
        return self.theta_clipped if self.theta_corrected is None else self.theta_corrected


def theta_from_stats(stats: BlockStats, scheme: Scheme, tau: float = math.nan) -> ThetaEstimate:
    if scheme not in SCHEMES:
        raise InvalidConfigError(f"unknown scheme {scheme!r}")
    theta = _raw_theta(stats.fhat(scheme), stats.tau_hat)
    return ThetaEstimate(mode=scheme, theta_raw=theta, k=stats.k, u=stats.u,
                         stats=stats, tau=tau)


def theta_hat(series, r: int, u: float, scheme: Scheme = "sliding") -> ThetaEstimate:
    """Disjoint or sliding blocks estimator ``-log(fhat) / tau_hat``.

    Raises
    ------
    DegenerateThresholdError
        If ``fhat == 0`` (threshold too low) or ``tau_hat == 0`` (too high).
    """
    return theta_from_stats(block_stats(series, r, u), scheme)


def intervals_estimator(series, u: float) -> ThetaEstimate:
    """Intervals estimator built from the gaps between successive exceedance times."""
    x = as_array(series)
    pos = np.flatnonzero(x > u)
    n_exc = pos.size
    if n_exc < 2:
        raise InsufficientExceedancesError(
            f"the intervals estimator needs at least 2 exceedances of u={u}, found {n_exc}")
    gaps = np.diff(pos).astype(float)
    if gaps.max() <= 2:
        theta = 2.0 * gaps.sum() ** 2 / ((n_exc - 1) * np.sum(gaps ** 2))
    else:
        theta = 2.0 * np.sum(gaps - 1) ** 2 / ((n_exc - 1) * np.sum((gaps - 1) * (gaps - 2)))
    return ThetaEstimate(mode="intervals", theta_raw=float(theta), k=0, u=float(u),
                         extra={"n_exceed": int(n_exc)})
