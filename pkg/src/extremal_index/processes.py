"""Exact simulators and closed-form oracles for three benchmark processes.

* ``iid_uniform`` / ``iid_frechet``: independent draws, extremal index 1;
* ``mar``: max-autoregressive ``X_n = max((1 - theta) X_{n-1}, W_n)`` with
  unit-Frechet innovations and ``X_1 = W_1 / theta``, extremal index theta;
* ``mm``: moving maximum ``X_n = max(W_{n-1}, W_n)``, ``X_1 = 2 W_1``,
  extremal index 1/2.

The MAR marginal is ``exp(-1/(theta x))`` and the MM marginal ``exp(-2/x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np
from numba import njit

from .blocks import TimeSeries
from .errors import InvalidConfigError

KINDS = ("iid_uniform", "iid_frechet", "mar", "mm")

SeedLike = Union[int, Iterable[int], np.random.SeedSequence]


@dataclass(frozen=True)
class ProcessSpec:
    kind: str
    theta_param: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfigError(f"unknown process kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "mar" and not 0.0 < self.theta_param <= 1.0:
            raise InvalidConfigError(f"mar needs theta in (0, 1], got {self.theta_param}")

    @property
    def theoretical_theta(self) -> float:
        if self.kind == "mar":
            return float(self.theta_param)
        if self.kind == "mm":
            return 0.5
        return 1.0

    @property
    def label(self) -> str:
        return f"mar({self.theta_param:g})" if self.kind == "mar" else self.kind

    @classmethod
    def parse(cls, text: str) -> "ProcessSpec":
        """Parse ``"mar:0.5"``, ``"mm"``, ``"iid_uniform"`` and friends."""
        kind, _, param = text.strip().partition(":")
        kind = kind.strip()
        if kind == "mar":
            if not param:
                raise InvalidConfigError("mar needs a theta, e.g. 'mar:0.5'")
            try:
                return cls("mar", float(param))
            except ValueError:
                raise InvalidConfigError(f"bad mar parameter {param!r}") from None
        if param:
            raise InvalidConfigError(f"process {kind!r} takes no parameter")
        return cls(kind)


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Philox generator keyed by an integer or a tuple of integers.

    A tuple ``(base, i, j, ...)`` gives an independent stream per key, so
    replicates can be generated in any order or on any worker.
    """
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    elif isinstance(seed, (int, np.integer)):
        ss = np.random.SeedSequence(int(seed))
    else:
        keys = [int(s) for s in seed]
        ss = np.random.SeedSequence(keys[0], spawn_key=tuple(keys[1:]))
    return np.random.Generator(np.random.Philox(ss))


def open_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform draws on the open interval (0, 1); 52-bit grid shifted by half a step."""
    k = rng.integers(0, 1 << 52, size=n, dtype=np.int64)
    return (k + 0.5) * 2.0 ** -52


def unit_frechet(rng: np.random.Generator, n: int) -> np.ndarray:
    return -1.0 / np.log(open_uniform(rng, n))


@njit(cache=True)
def _mar_recursion(w, theta):
    x = np.empty_like(w)
    x[0] = w[0] / theta
    a = 1.0 - theta
    for i in range(1, w.shape[0]):
        prev = a * x[i - 1]
        x[i] = prev if prev > w[i] else w[i]
    return x


def simulate_values(spec: ProcessSpec, n: int, seed: SeedLike) -> np.ndarray:
    if n < 1:
        raise InvalidConfigError(f"series length must be >= 1, got {n}")
    rng = make_rng(seed)
    if spec.kind == "iid_uniform":
        return open_uniform(rng, n)
    if spec.kind == "iid_frechet":
        return unit_frechet(rng, n)
    if spec.kind == "mar":
        return _mar_recursion(unit_frechet(rng, n), float(spec.theta_param))
    w = unit_frechet(rng, n)
    x = np.empty(n)
    x[0] = 2.0 * w[0]
    x[1:] = np.maximum(w[:-1], w[1:])
    return x


def simulate(spec: ProcessSpec, n: int, seed: SeedLike = 0) -> TimeSeries:
    """Simulate ``n`` observations; identical ``(spec, n, seed)`` give identical output."""
    return TimeSeries(simulate_values(spec, n, seed), source=f"{spec.label} seed={seed}")


def marginal_cdf(spec: ProcessSpec, u: float) -> float:
    if spec.kind == "iid_uniform":
        return min(max(u, 0.0), 1.0)
    if u <= 0:
        return 0.0
    if spec.kind == "iid_frechet":
        return math.exp(-1.0 / u)
    if spec.kind == "mar":
        return math.exp(-1.0 / (spec.theta_param * u))
    return math.exp(-2.0 / u)


def theoretical_Fr(spec: ProcessSpec, r: int, u: float) -> float:
    """Exact ``P(max(X_1, ..., X_r) <= u)``."""
    if r < 1:
        raise InvalidConfigError(f"block size must be >= 1, got {r}")
    if spec.kind == "iid_uniform":
        return marginal_cdf(spec, u) ** r
    if u <= 0:
        return 0.0
    if spec.kind == "iid_frechet":
        return math.exp(-r / u)
    if spec.kind == "mar":
        return math.exp(-1.0 / (spec.theta_param * u) - (r - 1) / u)
    return math.exp(-(r + 1) / u)


def _neg_log_fr(spec: ProcessSpec, r: int, tau: float) -> float:
    # -log F_r(u_r) with r * (1 - F(u_r)) = tau, written via L = -log(1 - tau/r)
    L = -math.log1p(-tau / r)
    if spec.kind in ("iid_uniform", "iid_frechet"):
        return r * L
    if spec.kind == "mar":
        th = spec.theta_param
        return L + (r - 1) * th * L
    return (r + 1) * L / 2.0


def exact_threshold(spec: ProcessSpec, r: int, tau: float) -> float:
    """The level ``u_r`` with ``r * P(X > u_r) = tau`` exactly."""
    if not 0 < tau < r:
        raise InvalidConfigError(f"need 0 < tau < r, got tau={tau}, r={r}")
    if spec.kind == "iid_uniform":
        return 1.0 - tau / r
    L = -math.log1p(-tau / r)
    if spec.kind == "iid_frechet":
        return 1.0 / L
    if spec.kind == "mar":
        return 1.0 / (spec.theta_param * L)
    return 2.0 / L


def theoretical_theta_r(spec: ProcessSpec, r: int, tau: float) -> float:
    """Finite-block extremal index ``-log F_r(u_r) / tau`` at the exact-tau threshold."""
    if not 0 < tau < r:
        raise InvalidConfigError(f"need 0 < tau < r, got tau={tau}, r={r}")
    return _neg_log_fr(spec, r, tau) / tau


@dataclass(frozen=True)
class ClusterTheory:
    m1: float
    m2: float

    @property
    def c2(self) -> float:
        return (self.m2 - self.m1 ** 2) / self.m1 ** 2


def cluster_theory(spec: ProcessSpec) -> ClusterTheory:
    """Mean and second moment of the limiting cluster size distribution.

    MAR clusters are geometric with success probability theta; MM clusters
    always have exactly two members.
    """
    if spec.kind in ("iid_uniform", "iid_frechet"):
        return ClusterTheory(1.0, 1.0)
    if spec.kind == "mm":
        return ClusterTheory(2.0, 4.0)
    th = spec.theta_param
    return ClusterTheory(1.0 / th, (2.0 - th) / th ** 2)
