"""Closed-form asymptotic variances and biases of the block estimators.

Every formula is a function of ``theta``, ``tau`` and the squared coefficient
of variation ``c2`` of the cluster size distribution, through
``alpha = theta * tau``.  Plug-in versions receive the clipped estimate of
theta, ``tau_hat`` and the floored ``c2_hat``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import NamedTuple

import numpy as np

from .blocks import ThetaEstimate
from .errors import DegenerateThresholdError, InvalidConfigError

ALPHA_LO = 0.05
ALPHA_HI = 10.0
GOLDEN_TOL = 1e-6
C2_BOUNDARY = 1e-6
THETA_FLOOR = 1e-6

# below this alpha the exponential tails are summed as power series
_SERIES_CUTOFF = 1.0
_SERIES_TERMS = 24


@dataclass(frozen=True)
class AsymptoticParams:
    """The triple ``(theta, tau, c2)`` that drives every asymptotic formula."""

    theta: float
    tau: float
    c2: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise InvalidConfigError(f"theta must lie in (0, 1], got {self.theta}")
        if not self.tau > 0.0:
            raise InvalidConfigError(f"tau must be positive, got {self.tau}")
        if not self.c2 >= 0.0:
            raise InvalidConfigError(f"c2 must be non-negative, got {self.c2}")

    @property
    def alpha(self) -> float:
        return self.theta * self.tau

    @property
    def m1(self) -> float:
        return 1.0 / self.theta

    @property
    def m2(self) -> float:
        return (self.c2 + 1.0) / self.theta ** 2

    @classmethod
    def from_estimate(cls, est: ThetaEstimate) -> "AsymptoticParams":
        """Plug-in parameters from a block estimate: clipped theta, tau_hat, floored c2."""
        stats = est.stats
        if stats is None:
            raise InvalidConfigError("plug-in parameters need a blocks estimate with statistics")
        if math.isnan(stats.c2_hat):
            raise DegenerateThresholdError(
                "c2_hat is undefined at this block size/threshold", "c2_hat", stats.c2_hat)
        return cls(theta=est.theta_clipped, tau=stats.tau_hat, c2=stats.c2_floored)


def _series(alpha, offset: int):
    # sum_{j>=0} alpha^j / (j + offset)!
    total = np.zeros_like(alpha)
    term = np.full_like(alpha, 1.0 / math.factorial(offset))
    for j in range(_SERIES_TERMS):
        total = total + term
        term = term * alpha / (j + offset + 1)
    return total


def _tail2(alpha):
    """(e^a - 1 - a) / a^2, accurate for small ``a``."""
    a = np.asarray(alpha, dtype=float)
    small = a < _SERIES_CUTOFF
    safe = np.where(small, 1.0, a)
    out = np.where(small, _series(np.where(small, a, 0.0), 2),
                   (np.expm1(safe) - safe) / safe ** 2)
    return out


def _tail3(alpha):
    """(e^a - 1 - a - a^2/2) / a^3, accurate for small ``a``."""
    a = np.asarray(alpha, dtype=float)
    small = a < _SERIES_CUTOFF
    safe = np.where(small, 1.0, a)
    out = np.where(small, _series(np.where(small, a, 0.0), 3),
                   (np.expm1(safe) - safe - safe ** 2 / 2) / safe ** 3)
    return out


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def variance_fn(mode: str, alpha, c2=0.0):
    """Asymptotic variance of ``sqrt(k) * (theta_hat / theta - 1)`` as a function of alpha.

    Accepts scalars or arrays for ``alpha`` and ``c2``.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(~(a > 0)):
        raise InvalidConfigError("alpha must be positive")
    if mode == "disjoint":
        base = _tail2(a)
    elif mode == "sliding":
        base = 2.0 * _tail3(a)
    else:
        raise InvalidConfigError(f"unknown mode {mode!r}")
    return _scalar(base + np.asarray(c2, dtype=float) / a)


def sigma_matrix(p: AsymptoticParams) -> np.ndarray:
    """Limiting covariance of ``sqrt(k) * (F_dj, F_sl, tau_hat)``."""
    a, tau = p.alpha, p.tau
    ea = math.exp(-a)
    s11 = ea * -math.expm1(-a)
    # 2/a e^-a (1 - (1+a) e^-a) == 2 a e^-2a (e^a - 1 - a)/a^2
    s22 = 2.0 * a * ea * ea * float(_tail2(a))
    s31 = -tau * ea
    s33 = a * p.m2
    return np.array([[s11, s22, s31],
                     [s22, s22, s31],
                     [s31, s31, s33]])


def v_matrix(p: AsymptoticParams) -> np.ndarray:
    """Limiting covariance of ``sqrt(k) * (theta_dj - theta, theta_sl - theta)``."""
    t2 = p.theta ** 2
    v11 = t2 * variance_fn("disjoint", p.alpha, p.c2)
    v22 = t2 * variance_fn("sliding", p.alpha, p.c2)
    return np.array([[v11, v22], [v22, v22]])


def asymptotic_variance(mode: str, p: AsymptoticParams) -> float:
    """The diagonal entry of :func:`v_matrix` for ``mode``."""
    return p.theta ** 2 * variance_fn(mode, p.alpha, p.c2)


class BiasPair(NamedTuple):
    mu_dj: float
    mu_sl: float

    def for_mode(self, mode: str) -> float:
        return self.mu_dj if mode == "disjoint" else self.mu_sl


def asymptotic_bias(p: AsymptoticParams) -> BiasPair:
    """First-order bias constants: ``k * (E[theta_hat] - theta_r) -> mu``."""
    a, th = p.alpha, p.theta
    cluster = th * p.c2 / a
    mu_dj = th * math.expm1(a) / (2.0 * a) + cluster
    mu_sl = th * float(_tail2(a)) + cluster
    return BiasPair(mu_dj, mu_sl)


class OptimalAlpha(NamedTuple):
    alpha: float
    value: float
    at_boundary: bool


def golden_section(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    """Minimizer of a unimodal ``f`` on ``[lo, hi]``, to absolute tolerance ``tol``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def optimal_alpha(mode: str, c2: float, lo: float = ALPHA_LO, hi: float = ALPHA_HI) -> OptimalAlpha:
    """Variance-minimizing alpha on ``[lo, hi]``.

    For ``c2`` below ``1e-6`` the variance function is increasing, so the
    left end point is returned with ``at_boundary=True``.
    """
    if not c2 >= 0:
        raise InvalidConfigError(f"c2 must be non-negative, got {c2}")
    if c2 < C2_BOUNDARY:
        return OptimalAlpha(lo, variance_fn(mode, lo, c2), True)
    a = golden_section(lambda t: variance_fn(mode, t, c2), lo, hi)
    at_boundary = a - lo <= 2 * GOLDEN_TOL or hi - a <= 2 * GOLDEN_TOL
    return OptimalAlpha(a, variance_fn(mode, a, c2), at_boundary)


def optimal_tau(mode: str, theta_hat: float, c2_hat: float) -> float:
    """Estimated variance-optimal tau: optimal alpha divided by the pilot theta."""
    if not 0 < theta_hat <= 1:
        raise InvalidConfigError(f"pilot theta must lie in (0, 1], got {theta_hat}")
    return optimal_alpha(mode, max(c2_hat, 0.0)).alpha / theta_hat


def bias_corrected(est: ThetaEstimate, p_hat: AsymptoticParams,
                   eps: float = THETA_FLOOR) -> ThetaEstimate:
    """Subtract the estimated first-order bias ``mu_hat / k``.

    The clipped estimate is corrected and re-clipped to ``[eps, 1]``;
    ``theta_corrected_raw`` keeps the unclipped ``theta_raw - mu_hat / k``.
    """
    if est.k < 1:
        raise InvalidConfigError("bias correction needs k >= 1 blocks")
    shift = asymptotic_bias(p_hat).for_mode(est.mode) / est.k
    corrected = min(est.theta_clipped - shift, 1.0)
    floored = corrected <= 0.0
    if floored:
        corrected = eps
    return dataclasses.replace(est, correction=shift, theta_corrected=corrected,
                               theta_corrected_raw=est.theta_raw - shift,
                               correction_floored=floored)


def normal_quantile(p: float) -> float:
    return NormalDist().inv_cdf(p)


def confidence_interval(est: ThetaEstimate, p_hat: AsymptoticParams,
                        level: float = 0.90) -> ThetaEstimate:
    """Normal-approximation interval around ``est.theta``.

    Stores both the raw interval and its intersection with ``(0, 1]``.
    """
    if not 0.0 < level < 1.0:
        raise InvalidConfigError(f"confidence level must lie in (0, 1), got {level}")
    if est.k < 1:
        raise InvalidConfigError("a confidence interval needs k >= 1 blocks")
    half = normal_quantile((1.0 + level) / 2.0) * math.sqrt(asymptotic_variance(est.mode, p_hat) / est.k)
    centre = est.theta
    lo, hi = centre - half, centre + half
    clipped = (max(lo, 0.0), min(hi, 1.0))
    return dataclasses.replace(est, ci=clipped, ci_raw=(lo, hi))
