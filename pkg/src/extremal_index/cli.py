"""Command-line front end.

Subcommands::

    extremal-index simulate --process mar:0.5 -n 10000 --seed 7 --out x.txt
    extremal-index sweep x.txt --r-grid 50,100,200 --tau optimal --bias-correct
    extremal-index study configs/mar_grid_smoke.cfg --out results/

Exit codes: 0 success, 1 usage or configuration error, 2 data failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import asymptotics as asy
from .blocks import TimeSeries, as_array, block_stats, intervals_estimator, select_threshold, theta_from_stats
from .errors import ExtremalIndexError, InsufficientDataError, InvalidConfigError
from .experiments import (FULL_REPLICATES, StudyConfig, run_study,
                          summarize_to_csv, summarize_to_json)
from .processes import ProcessSpec, simulate

log = logging.getLogger("extremal_index")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

SWEEP_COLUMNS = (
    "r", "k", "tau", "u", "n_exceed", "c2_hat", "theta_int",
    "tau_dj", "u_dj", "theta_dj_raw", "theta_dj", "theta_dj_bc", "ci_dj_lo", "ci_dj_hi",
    "ci_dj_lo_raw", "ci_dj_hi_raw",
    "tau_sl", "u_sl", "theta_sl_raw", "theta_sl", "theta_sl_bc", "ci_sl_lo", "ci_sl_hi",
    "ci_sl_lo_raw", "ci_sl_hi_raw",
    "status",
)

SWEEP_HELP = """\
report columns (one row per block size r):
  r, k            block size and number of disjoint blocks
  tau, u          the tau = --tau (or 1 under 'optimal') threshold rule and its threshold
  n_exceed        observations above u
  c2_hat          sliding estimate of the cluster-size squared coefficient of variation at u
  theta_int       intervals estimator at u
  tau_dj, u_dj    tau and threshold used by the disjoint estimator
  theta_dj_raw    disjoint estimate before clipping at 1
  theta_dj        clipped disjoint estimate
  theta_dj_bc     clipped estimate minus the estimated bias mu_hat/k
  ci_dj_lo/hi     normal confidence interval intersected with (0, 1]
  ci_dj_*_raw     same interval before intersection
  *_sl            the same quantities for the sliding estimator
  status          'ok' or a semicolon-separated list of failures
"""


@dataclass(frozen=True)
class IngestSpec:
    path: str
    column: int = 0
    delimiter: str = ","
    skip_header: bool = False
    negate: bool = False
    log_returns: bool = False


def read_series(spec: IngestSpec) -> tuple[TimeSeries, int]:
    """Parse one numeric column; returns the series and the number of rejected rows.

    Lines starting with ``#`` and blank lines are ignored.  Parsing uses
    Python's ``float`` so it does not depend on the locale.
    """
    path = Path(spec.path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InsufficientDataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if spec.skip_header and lines:
        lines = lines[1:]
    values, rejected = [], 0
    for row in csv.reader(lines, delimiter=spec.delimiter):
        try:
            v = float(row[spec.column].strip())
        except (IndexError, ValueError):
            rejected += 1
            continue
        if not math.isfinite(v):
            rejected += 1
            continue
        values.append(v)
    x = np.asarray(values, dtype=float)
    if spec.log_returns:
        if np.any(x <= 0):
            raise InsufficientDataError(f"{path}: log returns need strictly positive prices")
        x = np.diff(np.log(x))
    if spec.negate:
        x = -x
    if x.size == 0:
        raise InsufficientDataError(f"{path}: no usable observations in column {spec.column}")
    return TimeSeries(x, source=str(path), negated=spec.negate), rejected


def _interval_cols(est, prefix: str) -> dict:
    return {f"ci_{prefix}_lo": est.ci[0], f"ci_{prefix}_hi": est.ci[1],
            f"ci_{prefix}_lo_raw": est.ci_raw[0], f"ci_{prefix}_hi_raw": est.ci_raw[1]}


def sweep(series, r_grid: Sequence[int], tau: float | str = 1.0, level: float = 0.90,
          bias_correct: bool = False) -> list[dict]:
    """Estimate theta across block sizes; one dict per ``r`` with :data:`SWEEP_COLUMNS` keys.

    ``tau="optimal"`` uses a pilot at tau = 1 to choose a per-estimator tau.
    Confidence intervals are centred on the uncorrected estimates unless
    ``bias_correct`` is set.
    """
    x = as_array(series)
    n = x.size
    if not r_grid:
        raise InvalidConfigError("r grid is empty")
    if n < 2 * max(r_grid):
        raise InsufficientDataError(
            f"series of length n={n} is too short: every block size needs n >= 2r "
            f"(max r = {max(r_grid)})")
    optimal = tau == "optimal"
    base_tau = 1.0 if optimal else float(tau)
    rows = []
    for r in r_grid:
        row = dict.fromkeys(SWEEP_COLUMNS, math.nan)
        row["r"], row["k"], row["tau"] = r, n // r, base_tau
        failures = []
        u = select_threshold(x, r, base_tau)
        base = block_stats(x, r, u)
        row.update(u=u, n_exceed=base.n_exceed, c2_hat=base.c2_hat)
        try:
            row["theta_int"] = intervals_estimator(x, u).theta_raw
        except ExtremalIndexError as exc:
            failures.append(f"int: {exc}")
        for mode, tag in (("disjoint", "dj"), ("sliding", "sl")):
            try:
                est = theta_from_stats(base, mode, tau=base_tau)
                stats = base
                if optimal:
                    t = asy.optimal_tau(mode, est.theta_clipped, base.c2_floored)
                    stats = block_stats(x, r, select_threshold(x, r, t))
                    est = theta_from_stats(stats, mode, tau=t)
                p_hat = asy.AsymptoticParams.from_estimate(est)
                corrected = asy.bias_corrected(est, p_hat)
                row.update({f"tau_{tag}": est.tau, f"u_{tag}": est.u,
                            f"theta_{tag}_raw": est.theta_raw, f"theta_{tag}": est.theta_clipped,
                            f"theta_{tag}_bc": corrected.theta_corrected})
                ci = asy.confidence_interval(corrected if bias_correct else est, p_hat, level)
                row.update(_interval_cols(ci, tag))
            except ExtremalIndexError as exc:
                failures.append(f"{tag}: {exc}")
        row["status"] = "ok" if not failures else "; ".join(failures)
        rows.append(row)
    return rows


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else f"{float(value):.6g}"
    return str(value)


def format_rows(rows: Sequence[dict], columns: Sequence[str], fmt: str = "csv") -> str:
    if fmt == "json":
        return json.dumps([{c: (None if _fmt(row[c]) == "nan" else
                                float(_fmt(row[c])) if isinstance(row[c], (float, np.floating))
                                else row[c]) for c in columns} for row in rows], indent=1)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


_LIST_KEYS = {"processes", "r_grid", "tau_rules", "corrections"}
_CONFIG_KEYS = _LIST_KEYS | {"n", "replicates", "base_seed", "ci_level"}


def parse_study_config(text: str) -> StudyConfig:
    """Parse ``key = value`` lines (``#`` comments, comma-separated lists).

    Every problem found is reported in a single :class:`InvalidConfigError`.
    """
    problems: list[str] = []
    fields: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        if key not in _CONFIG_KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        items = [v.strip() for v in value.split(",") if v.strip()]
        try:
            if key == "processes":
                fields[key] = tuple(ProcessSpec.parse(v) for v in items)
            elif key == "r_grid":
                fields[key] = tuple(int(v) for v in items)
            elif key in _LIST_KEYS:
                fields[key] = tuple(items)
            elif key == "ci_level":
                fields[key] = float(value)
            else:
                fields[key] = int(value)
        except (ValueError, ExtremalIndexError) as exc:
            problems.append(f"line {lineno}: bad value for {key}: {exc}")
    try:
        cfg = StudyConfig(**{"processes": (), **fields})
    except InvalidConfigError as exc:
        problems += [p.strip() for p in str(exc).splitlines()[1:] if p.strip()]
        cfg = None
    if problems:
        raise InvalidConfigError("invalid study configuration:\n  " + "\n  ".join(problems))
    return cfg


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InsufficientDataError(f"cannot write {path}: {exc.strerror or exc}") from exc


def cmd_simulate(args) -> int:
    spec = ProcessSpec.parse(args.process)
    series = simulate(spec, args.n, args.seed)
    header = f"# process={spec.label} kind={spec.kind} theta={spec.theta_param!r} n={args.n} seed={args.seed}\n"
    _write(args.out, header + "".join(f"{v!r}\n" for v in series.values.tolist()))
    return EXIT_OK


def _parse_tau(text: str):
    if text == "optimal":
        return "optimal"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--tau must be a positive number or 'optimal', got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"--tau must be positive, got {text}")
    return value


def _parse_r_grid(text: str) -> list[int]:
    try:
        grid = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--r-grid must be comma-separated integers, got {text!r}")
    if not grid or min(grid) < 1:
        raise argparse.ArgumentTypeError("--r-grid needs at least one positive block size")
    return grid


def cmd_sweep(args) -> int:
    ingest = IngestSpec(args.input, args.column, args.delimiter, args.skip_header,
                        args.negate, args.log_returns)
    series, rejected = read_series(ingest)
    if rejected:
        log.warning("%s: skipped %d unparseable rows", ingest.path, rejected)
    rows = sweep(series, args.r_grid, args.tau, args.level, args.bias_correct)
    _write(args.out, format_rows(rows, SWEEP_COLUMNS, args.format))
    if all(row["status"] != "ok" and math.isnan(row["theta_sl"]) and math.isnan(row["theta_dj"])
           for row in rows):
        log.error("every block size failed")
        return EXIT_DATA
    return EXIT_OK


def cmd_study(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise InsufficientDataError(f"cannot read {args.config}: {exc.strerror or exc}") from exc
    cfg = parse_study_config(text)
    if args.full:
        cfg = dataclasses.replace(cfg, replicates=FULL_REPLICATES)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, base_seed=args.seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    results = run_study(cfg, workers=args.workers)
    wall = time.perf_counter() - start
    _write(str(out / "results.csv"), summarize_to_csv(results))
    _write(str(out / "results_extended.csv"), summarize_to_csv(results, extended=True))
    if args.format == "json":
        _write(str(out / "results.json"), summarize_to_json(results))
    meta = [f"config = {Path(args.config).resolve()}", f"base_seed = {cfg.base_seed}",
            f"replicates = {cfg.replicates}", f"workers = {args.workers}",
            f"rows = {len(results)}", f"wall_time_s = {wall:.3f}", "", "# config echo", text]
    _write(str(out / "run_metadata.txt"), "\n".join(meta))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="random seed (unsigned 64-bit)")
    shared.add_argument("--out", default=None, help="output file (directory for study); default stdout")
    shared.add_argument("--format", choices=("csv", "json"), default="csv")
    shared.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="extremal-index",
                     description="Disjoint and sliding blocks estimators of the extremal index.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[shared], help="simulate a benchmark process")
    p.add_argument("--process", required=True,
                   help="iid_uniform, iid_frechet, mm, or mar:<theta>")
    p.add_argument("-n", type=int, required=True, help="series length")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[shared], help="estimate theta over a grid of block sizes",
                       epilog=SWEEP_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("input", help="delimited text file")
    p.add_argument("--column", type=int, default=0, help="zero-based column index")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--skip-header", action="store_true")
    p.add_argument("--negate", action="store_true", help="analyse the negated series")
    p.add_argument("--log-returns", action="store_true", help="convert prices to log returns first")
    p.add_argument("--r-grid", type=_parse_r_grid, default=[25, 50, 100, 200])
    p.add_argument("--tau", type=_parse_tau, default=1.0, help="positive number or 'optimal'")
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--bias-correct", action="store_true",
                   help="centre confidence intervals on the bias-corrected estimates")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("study", parents=[shared], help="run a Monte Carlo study from a config file")
    p.add_argument("config", help="key = value configuration file")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--full", action="store_true", help=f"use {FULL_REPLICATES} replicates")
    p.set_defaults(func=cmd_study)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s: %(message)s")
    if args.command == "simulate" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"extremal-index: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExtremalIndexError as exc:
        print(f"extremal-index: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
