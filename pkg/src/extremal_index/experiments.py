"""Monte Carlo harness for bias, standard error and coverage of the estimators.

A study runs a grid of (process, block size) *simulation cells*.  Every
replicate of a simulation cell is one simulated series whose random stream
is keyed by ``(base_seed, process index, r index, replicate index)``; all
tau rules and correction settings of that cell are evaluated on the same
series (common random numbers).  Cells are independent tasks and the
reduction happens in grid order, so the output does not depend on the
number of workers.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import asymptotics as asy
from .blocks import SCHEMES, ThetaEstimate, as_array, block_stats, intervals_estimator, select_threshold, theta_from_stats
from .errors import ExtremalIndexError, InvalidConfigError
from .processes import ProcessSpec, simulate_values

log = logging.getLogger(__name__)

TAU_RULES = ("default_1", "optimal")
CORRECTIONS = ("none", "subtract_mu")
ESTIMATORS = ("disjoint", "sliding", "intervals")
DEFAULT_REPLICATES = 2000
FULL_REPLICATES = 10_000

CSV_COLUMNS = ("process", "theta_true", "n", "r", "tau_rule", "correction", "estimator",
               "mean_theta", "bias", "stderr", "mc_error", "coverage", "n_failed")
EXTENDED_COLUMNS = CSV_COLUMNS + ("n_ok", "mean_theta_raw", "bias_raw", "stderr_raw",
                                  "coverage_raw", "mean_tau", "quality")


@dataclass(frozen=True)
class StudyConfig:
    processes: tuple[ProcessSpec, ...]
    n: int = 10_000
    r_grid: tuple[int, ...] = (25, 50, 100, 200, 400)
    tau_rules: tuple[str, ...] = ("default_1",)
    corrections: tuple[str, ...] = ("none",)
    replicates: int = DEFAULT_REPLICATES
    base_seed: int = 0
    ci_level: float = 0.90

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise InvalidConfigError("invalid study configuration:\n  " + "\n  ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not self.processes:
            out.append("process grid is empty")
        if not self.r_grid:
            out.append("r_grid is empty")
        if self.n < 1:
            out.append(f"n must be >= 1, got {self.n}")
        for r in self.r_grid:
            if r < 1 or 2 * r > self.n:
                out.append(f"block size r={r} violates 1 <= r and n >= 2r (n={self.n})")
        if not self.tau_rules:
            out.append("tau_rules is empty")
        out += [f"unknown tau rule {t!r}" for t in self.tau_rules if t not in TAU_RULES]
        if not self.corrections:
            out.append("corrections is empty")
        out += [f"unknown correction {c!r}" for c in self.corrections if c not in CORRECTIONS]
        if self.replicates < 1:
            out.append(f"replicates must be >= 1, got {self.replicates}")
        if not 0 < self.ci_level < 1:
            out.append(f"ci_level must lie in (0, 1), got {self.ci_level}")
        return out


@dataclass(frozen=True)
class CellResult:
    process: str
    theta_true: float
    n: int
    r: int
    tau_rule: str
    correction: str
    estimator: str
    mean_theta: float
    bias: float
    stderr: float
    mc_error: float
    coverage: float
    n_failed: int
    n_ok: int = 0
    mean_theta_raw: float = math.nan
    bias_raw: float = math.nan
    stderr_raw: float = math.nan
    coverage_raw: float = math.nan
    mean_tau: float = math.nan
    quality: str = "ok"


def _finish(est: ThetaEstimate, correct: bool, level: float) -> ThetaEstimate:
    p_hat = asy.AsymptoticParams.from_estimate(est)
    if correct:
        est = asy.bias_corrected(est, p_hat)
    return asy.confidence_interval(est, p_hat, level)


def estimate_series(x, r: int, tau_rule: str = "default_1", correction: str = "none",
                    level: float = 0.90) -> dict[str, object]:
    """All three estimators on one series; failures come back as the exception instance.

    Under ``tau_rule="optimal"`` the pilot (theta, c2) at tau = 1 sets a
    per-mode tau; the intervals estimator always uses the tau = 1 threshold.
    """
    x = as_array(x)
    correct = correction == "subtract_mu"
    u1 = select_threshold(x, r, 1.0)
    pilot = block_stats(x, r, u1)
    out: dict[str, object] = {}
    for mode in SCHEMES:
        try:
            if tau_rule == "optimal":
                est = theta_from_stats(pilot, mode, tau=1.0)
                tau = asy.optimal_tau(mode, est.theta_clipped, pilot.c2_floored)
                stats = block_stats(x, r, select_threshold(x, r, tau))
            else:
                tau, stats = 1.0, pilot
            out[mode] = _finish(theta_from_stats(stats, mode, tau=tau), correct, level)
        except ExtremalIndexError as exc:
            out[mode] = exc
    try:
        out["intervals"] = intervals_estimator(x, u1)
    except ExtremalIndexError as exc:
        out["intervals"] = exc
    return out


def run_replicate(spec: ProcessSpec, n: int, r: int, tau_rule: str = "default_1",
                  corrections: str = "none", seed=0, level: float = 0.90) -> dict[str, object]:
    """Simulate one series and estimate theta with every estimator."""
    if 2 * r > n:
        raise InvalidConfigError(f"a replicate needs n >= 2r (n={n}, r={r})")
    x = simulate_values(spec, n, seed)
    return estimate_series(x, r, tau_rule, corrections, level)


# per replicate and per (tau_rule, correction, estimator):
# theta, theta_raw-ish, covered, covered_raw, tau
_FIELDS = 5


def _simulation_cell(args) -> np.ndarray:
    cfg, ip, ir = args
    spec, r = cfg.processes[ip], cfg.r_grid[ir]
    theta_true = spec.theoretical_theta
    combos = [(t, c) for t in cfg.tau_rules for c in cfg.corrections]
    out = np.full((cfg.replicates, len(combos), len(ESTIMATORS), _FIELDS), np.nan)
    for rep in range(cfg.replicates):
        x = simulate_values(spec, cfg.n, (cfg.base_seed, ip, ir, rep))
        for ic, (tau_rule, correction) in enumerate(combos):
            res = estimate_series(x, r, tau_rule, correction, cfg.ci_level)
            for ie, name in enumerate(ESTIMATORS):
                est = res[name]
                if not isinstance(est, ThetaEstimate):
                    continue
                raw = est.theta_raw if est.theta_corrected_raw is None else est.theta_corrected_raw
                row = out[rep, ic, ie]
                row[0] = est.theta
                row[1] = raw
                if est.ci is not None:
                    row[2] = est.ci[0] <= theta_true <= est.ci[1]
                    lo, hi = est.ci_raw
                    shift = raw - est.theta
                    row[3] = lo + shift <= theta_true <= hi + shift
                row[4] = est.tau
    return out


def _summarize(vals: np.ndarray, theta_true: float, replicates: int) -> dict:
    ok = ~np.isnan(vals[:, 0])
    n_ok = int(ok.sum())
    n_failed = replicates - n_ok
    if n_ok == 0:
        nan = math.nan
        return dict(mean_theta=nan, bias=nan, stderr=nan, mc_error=nan, coverage=nan,
                    n_failed=n_failed, n_ok=0, mean_theta_raw=nan, bias_raw=nan,
                    stderr_raw=nan, coverage_raw=nan, mean_tau=nan)
    v = vals[ok]

    def sd(col):
        return float(np.std(col, ddof=1)) if n_ok > 1 else 0.0

    def mean_or_nan(col):
        col = col[~np.isnan(col)]
        return float(col.mean()) if col.size else math.nan

    mean = float(v[:, 0].mean())
    mean_raw = float(v[:, 1].mean())
    stderr = sd(v[:, 0])
    return dict(mean_theta=mean, bias=mean - theta_true, stderr=stderr,
                mc_error=stderr / math.sqrt(n_ok) if n_ok > 1 else math.nan,
                coverage=mean_or_nan(v[:, 2]), n_failed=n_failed, n_ok=n_ok,
                mean_theta_raw=mean_raw, bias_raw=mean_raw - theta_true,
                stderr_raw=sd(v[:, 1]), coverage_raw=mean_or_nan(v[:, 3]),
                mean_tau=mean_or_nan(v[:, 4]))


def run_study(cfg: StudyConfig, workers: int = 1) -> list[CellResult]:
    """One :class:`CellResult` per (process, r, tau_rule, correction, estimator), in grid order."""
    tasks = [(cfg, ip, ir) for ip in range(len(cfg.processes)) for ir in range(len(cfg.r_grid))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_simulation_cell, tasks))
    else:
        raw = [_simulation_cell(t) for t in tasks]

    combos = [(t, c) for t in cfg.tau_rules for c in cfg.corrections]
    results = []
    for (_, ip, ir), arr in zip(tasks, raw):
        spec, r = cfg.processes[ip], cfg.r_grid[ir]
        for ic, (tau_rule, correction) in enumerate(combos):
            for ie, name in enumerate(ESTIMATORS):
                s = _summarize(arr[:, ic, ie], spec.theoretical_theta, cfg.replicates)
                quality = "ok"
                if s["n_failed"] > cfg.replicates / 2:
                    quality = "mostly_failed"
                elif cfg.replicates == 1:
                    quality = "single_replicate"
                results.append(CellResult(process=spec.label, theta_true=spec.theoretical_theta,
                                          n=cfg.n, r=r, tau_rule=tau_rule, correction=correction,
                                          estimator=name, quality=quality, **s))
                if tau_rule == "optimal" and name != "intervals":
                    log.info("%s r=%d %s: mean estimated optimal tau %.3f (exceeds 1: %s)",
                             spec.label, r, name, s["mean_tau"], s["mean_tau"] > 1)
                if correction == "none" and name != "intervals":
                    log.debug("%s r=%d %s %s: bias clipped %.4g, bias raw %.4g",
                              spec.label, r, tau_rule, name, s["bias"], s["bias_raw"])
    return results


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.6g}"
    return str(value)


def summarize_to_csv(results: Sequence[CellResult], extended: bool = False) -> str:
    """CSV table with a header and one row per cell, numbers to 6 significant digits."""
    if not results:
        raise InvalidConfigError("no results to summarize")
    columns = EXTENDED_COLUMNS if extended else CSV_COLUMNS
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for res in results:
        row = asdict(res)
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def summarize_to_json(results: Sequence[CellResult], extended: bool = False) -> str:
    if not results:
        raise InvalidConfigError("no results to summarize")
    columns = EXTENDED_COLUMNS if extended else CSV_COLUMNS
    rows = []
    for res in results:
        row = asdict(res)
        rows.append({c: (None if isinstance(row[c], float) and math.isnan(row[c])
                         else float(_fmt(row[c])) if isinstance(row[c], float) else row[c])
                     for c in columns})
    return json.dumps(rows, indent=1)


def find_cell(results: Sequence[CellResult], **match) -> CellResult:
    """The unique cell whose fields equal ``match``."""
    hits = [c for c in results if all(getattr(c, k) == v for k, v in match.items())]
    if len(hits) != 1:
        raise KeyError(f"{len(hits)} cells match {match}")
    return hits[0]
