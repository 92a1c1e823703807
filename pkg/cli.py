# cli.py
"""
Experiment harness.

    python cli.py run   --config configs/small.cfg --scheme bcd --trial 3
    python cli.py sweep --param n_ris --values 4,8,16 --trials 50 --scheme bcd,no-ris --out asr.csv --jobs 4
    python cli.py trace --trial 0 --out trace.csv
    python cli.py bench --dims n_ris,n_rf --factors 1,2,4 --repeats 3 --out bench.csv
    python cli.py history

Per-trial CSV columns (all floats with 17 significant digits):

    scheme, param, value, trial, seed, sum_rate, bits, iterations, status

Wall times go to <out>_timing.csv and median / interquartile statistics to
<out>_summary.csv, so the main CSV is byte-identical across re-runs.
"""

import argparse
import asyncio
import csv
import importlib
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

import config
from bcd import (SolveOptions, SolveReport, bcd_solve, draw_trial, greedy_selection, normalized)
from bitbeam_sca import ScaOptions, first_subproblem
from channel import ChannelFileError, write_channels
from database import add_trial_rows, create_sweep, get_sweep_rows, init_db, list_sweeps
from logger import logger, set_console_level
from mm_decoder import MmOptions, optimize_decoders
from phase_opt import MoOptions
from quantizer import CombinerState, dft_codebook
from scenario import AQNM_MODES, ConfigError, SystemConfig, apply_overrides, config_text, load_config, trial_seed
from schemes import SchemeRegistry

SWEEP_PARAMS = ("n_ris", "n_rf", "b_max", "none")
TRIAL_FIELDS = ("scheme", "param", "value", "trial", "seed", "sum_rate", "bits", "iterations", "status")
SUMMARY_FIELDS = ("scheme", "param", "value", "trials", "ok", "median", "q1", "q3", "iqr")
TIMING_FIELDS = ("scheme", "value", "trial", "wall_time", "sca_s", "mm_s", "mo_s")
TRACE_FIELDS = ("iteration", "sum_rate")
SCA_TRACE_FIELDS = ("outer", "sca_iteration", "objective", "b", "violation")
BENCH_DIMS = ("n_beams", "n_rf", "n_users", "n_ap", "n_ris")
BENCH_BLOCKS = ("sca", "mm", "mo")
BENCH_FIELDS = ("dim", "value", "repeat", "iterations", "sca_s", "mm_s", "mo_s")
SLOPE_FIELDS = ("dim", "block", "slope", "points")
SPREAD_FIELDS = ("dim", "value", "block", "mean_s", "std_s")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return config.FLOAT_FORMAT.format(float(x))
    return str(x)


def _csv_writer(fh: TextIO, fields: Sequence[str]) -> csv.DictWriter:
    w = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    return w


def side_path(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}{out.suffix or '.csv'}")


# ==========================================================
# Auto-load all schemes from /schemes folder
# ==========================================================
def load_all_schemes(registry: SchemeRegistry, folder: str = config.SCHEME_FOLDER) -> Tuple[int, int]:
    loaded = 0
    failed = 0

    base = Path(__file__).resolve().parent / folder
    for file in sorted(os.listdir(base)):
        if file.endswith(".py") and not file.startswith("_"):
            ext = f"{folder}.{file[:-3]}"
            try:
                importlib.import_module(ext).setup(registry)
                logger.debug(f"[SCHEME LOADED] {ext}")
                loaded += 1
            except Exception as e:
                logger.error(f"[SCHEME FAILED] {ext} - {e}")
                failed += 1

    logger.debug(f"Schemes loaded: {loaded}, Failed: {failed}")
    return loaded, failed


_REGISTRY: Optional[SchemeRegistry] = None


def registry() -> SchemeRegistry:
    """Process-wide registry; worker processes build their own on first use."""
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = SchemeRegistry()
        load_all_schemes(_REGISTRY)
    return _REGISTRY


# ==========================================================
# Trials
# ==========================================================
@dataclass(frozen=True)
class TrialJob:
    order: int
    cfg: SystemConfig
    scheme: str
    param: str
    value: Optional[int]
    trial_index: int
    options: SolveOptions


@dataclass
class TrialOutcome:
    order: int
    row: Dict[str, str]
    record: Dict[str, object]            # raw values for the results database
    timing: Dict[str, str]
    report: Optional[SolveReport] = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.row["status"] != "error"


def run_trial(job: TrialJob) -> TrialOutcome:
    """Draw the trial's channels and run one scheme. Never raises: failures become status 'error'."""
    seed = trial_seed(job.cfg.seed, job.trial_index)
    row = {"scheme": job.scheme, "param": job.param, "value": fmt(job.value),
           "trial": str(job.trial_index), "seed": str(seed.derived_stream)}
    record = {"scheme": job.scheme, "param_value": job.value, "trial_index": job.trial_index,
              "seed": str(seed.derived_stream)}
    t0 = time.perf_counter()
    try:
        trial = draw_trial(job.cfg, seed)
        report = registry().get(job.scheme).run(job.cfg, trial, job.options)
    except Exception as e:
        wall = time.perf_counter() - t0
        logger.exception(f"[SWEEP] {job.scheme} trial {job.trial_index} ({job.param}={job.value}) failed")
        row.update(sum_rate="nan", bits="", iterations="", status="error")
        record.update(sum_rate=None, bits=None, iterations=None, status="error", wall_time=wall)
        timing = {"scheme": job.scheme, "value": fmt(job.value), "trial": str(job.trial_index), "wall_time": fmt(wall)}
        return TrialOutcome(job.order, row, record, timing, None, str(e))

    wall = time.perf_counter() - t0
    row.update(sum_rate=fmt(report.sum_rate), bits=str(report.bits), iterations=str(report.iterations),
               status=report.status)
    record.update(sum_rate=report.sum_rate, bits=report.bits, iterations=report.iterations,
                  status=report.status, wall_time=wall)
    timing = {"scheme": job.scheme, "value": fmt(job.value), "trial": str(job.trial_index), "wall_time": fmt(wall)}
    timing.update({f"{b}_s": fmt(report.block_times.get(b, 0.0)) for b in BENCH_BLOCKS})
    return TrialOutcome(job.order, row, record, timing, report)


class OrderedWriter:
    """Single writer: outcomes may arrive in any order, rows go out in job order."""

    def __init__(self, sinks: Sequence[Callable[[TrialOutcome], None]]):
        self.sinks = list(sinks)
        self.pending: Dict[int, TrialOutcome] = {}
        self.next = 0
        self.done: List[TrialOutcome] = []

    def push(self, outcome: TrialOutcome) -> None:
        self.pending[outcome.order] = outcome
        while self.next in self.pending:
            ready = self.pending.pop(self.next)
            for sink in self.sinks:
                sink(ready)
            self.done.append(ready)
            self.next += 1


async def execute(jobs: Sequence[TrialJob], n_jobs: int, writer: OrderedWriter) -> None:
    if n_jobs <= 1:
        for job in jobs:
            writer.push(run_trial(job))
        return
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        futures = [loop.run_in_executor(pool, run_trial, job) for job in jobs]
        for fut in asyncio.as_completed(futures):
            writer.push(await fut)


# ==========================================================
# Sweeps
# ==========================================================
@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: Tuple[Optional[int], ...]
    trials: int
    schemes: Tuple[str, ...]
    out: Path

    def points(self, cfg: SystemConfig) -> List[Tuple[Optional[int], SystemConfig]]:
        """One validated scenario per swept value; raises ConfigError on the first bad one."""
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"cannot sweep {self.param!r}; choose from {', '.join(SWEEP_PARAMS)}", field=self.param)
        if self.trials < 1:
            raise ConfigError("trials must be at least 1", field="trials")
        if not self.schemes:
            raise ConfigError("no scheme selected", field="scheme")
        if self.param == "none":
            return [(None, cfg)]
        return [(v, replace(cfg, **{self.param: v})) for v in self.values]

    def jobs(self, cfg: SystemConfig, options: SolveOptions) -> List[TrialJob]:
        out = []
        for value, point in self.points(cfg):
            for scheme in self.schemes:
                for t in range(self.trials):
                    out.append(TrialJob(len(out), point, scheme, self.param, value, t, options))
        return out


def summarize(outcomes: Sequence[TrialOutcome]) -> List[Dict[str, str]]:
    groups: Dict[Tuple[str, str], List[TrialOutcome]] = {}
    for o in outcomes:
        groups.setdefault((o.row["scheme"], o.row["value"]), []).append(o)
    rows = []
    for (scheme, value), items in groups.items():
        rates = np.array([float(o.row["sum_rate"]) for o in items if o.ok])
        row = {"scheme": scheme, "param": items[0].row["param"], "value": value,
               "trials": str(len(items)), "ok": str(rates.size)}
        if rates.size:
            q1, med, q3 = np.percentile(rates, [25, 50, 75])
            row.update(median=fmt(med), q1=fmt(q1), q3=fmt(q3), iqr=fmt(q3 - q1))
        else:
            row.update(median="nan", q1="nan", q3="nan", iqr="nan")
        rows.append(row)
    return rows


def run_sweep(sweep: SweepSpec, cfg: SystemConfig, options: SolveOptions, n_jobs: int = 1,
              db_path: Optional[str] = None, scenario_text: str = "") -> int:
    """Run every (value, scheme, trial) job and write the CSV files; returns the exit code."""
    jobs = sweep.jobs(cfg, options)
    for scheme in sweep.schemes:
        registry().get(scheme)
    logger.info(f"[SWEEP] {len(jobs)} trials: {sweep.param} in {list(sweep.values)} x {list(sweep.schemes)}, jobs={n_jobs}")

    sweep.out.parent.mkdir(parents=True, exist_ok=True)
    with sweep.out.open("w", newline="", encoding="utf-8") as fh, \
            side_path(sweep.out, "timing").open("w", newline="", encoding="utf-8") as th:
        rows_w = _csv_writer(fh, TRIAL_FIELDS)
        time_w = _csv_writer(th, TIMING_FIELDS)

        def log_outcome(o: TrialOutcome) -> None:
            if o.ok:
                logger.debug(f"[SWEEP] #{o.order} {o.row['scheme']} {sweep.param}={o.row['value']} "
                             f"trial={o.row['trial']} asr={float(o.row['sum_rate']):.4f}")
            else:
                logger.warning(f"[SWEEP] #{o.order} recorded as error: {o.error}")

        writer = OrderedWriter([lambda o: rows_w.writerow(o.row), lambda o: time_w.writerow(o.timing), log_outcome])
        asyncio.run(execute(jobs, n_jobs, writer))

    with side_path(sweep.out, "summary").open("w", newline="", encoding="utf-8") as sh:
        w = _csv_writer(sh, SUMMARY_FIELDS)
        for row in summarize(writer.done):
            w.writerow(row)

    if db_path:
        try:
            asyncio.run(_persist(db_path, sweep, writer.done, scenario_text))
        except Exception as e:
            logger.error(f"[DB] could not store sweep in {db_path}: {e}")

    failed = sum(not o.ok for o in writer.done)
    logger.info(f"[SWEEP] done: {len(writer.done) - failed} ok, {failed} failed -> {sweep.out}")
    return 0 if failed == 0 else 1


async def _persist(db_path: str, sweep: SweepSpec, outcomes: Sequence[TrialOutcome], scenario_text: str) -> int:
    await init_db(db_path)
    sweep_id = await create_sweep(sweep.param, sweep.schemes, scenario_text, db_path)
    await add_trial_rows(sweep_id, [o.record for o in outcomes], db_path)
    logger.info(f"[DB] sweep {sweep_id} stored in {db_path}")
    return sweep_id


# ==========================================================
# Complexity benchmark
# ==========================================================
def bench_complexity(cfg: SystemConfig, dims: Sequence[str], factors: Sequence[float], repeats: int,
                     options: SolveOptions) -> List[Dict[str, object]]:
    """Per-iteration block wall times while one dimension is scaled and the rest stay fixed."""
    rows: List[Dict[str, object]] = []
    for dim in dims:
        if dim not in BENCH_DIMS:
            raise ConfigError(f"cannot benchmark {dim!r}; choose from {', '.join(BENCH_DIMS)}", field=dim)
        for factor in factors:
            value = max(1, int(round(getattr(cfg, dim) * factor)))
            try:
                point = replace(cfg, **{dim: value})
            except ConfigError as e:
                logger.warning(f"[BENCH] skipping {dim}={value}: {e}")
                continue
            for r in range(repeats):
                seed = trial_seed(cfg.seed, r)
                trial = draw_trial(point, seed)
                report = bcd_solve(point, trial.chan, options, seed)
                per_it = max(report.iterations, 1)
                row = {"dim": dim, "value": value, "repeat": r, "iterations": report.iterations}
                row.update({f"{b}_s": report.block_times[b] / per_it for b in BENCH_BLOCKS})
                rows.append(row)
                logger.debug(f"[BENCH] {dim}={value} repeat={r} " +
                             " ".join(f"{b}={row[f'{b}_s']:.4g}s" for b in BENCH_BLOCKS))
    return rows


def fit_slopes(rows: Sequence[Dict[str, object]]) -> Tuple[List[Dict[str, object]], List[Dict[str, object]]]:
    """Log-log slope of mean block time against each scaled dimension, plus the spread at every point."""
    slopes, spread = [], []
    for dim in dict.fromkeys(r["dim"] for r in rows):
        values = sorted({r["value"] for r in rows if r["dim"] == dim})
        for block in BENCH_BLOCKS:
            means = []
            for v in values:
                t = np.array([r[f"{block}_s"] for r in rows if r["dim"] == dim and r["value"] == v])
                means.append(float(np.mean(t)))
                spread.append({"dim": dim, "value": v, "block": block, "mean_s": means[-1],
                               "std_s": float(np.std(t, ddof=1)) if t.size > 1 else 0.0})
            ok = [(v, m) for v, m in zip(values, means) if m > 0]
            slope = float("nan")
            if len(ok) >= 2:
                x, y = np.log([v for v, _ in ok]), np.log([m for _, m in ok])
                slope = float(np.polyfit(x, y, 1)[0])
            slopes.append({"dim": dim, "block": block, "slope": slope, "points": len(ok)})
    return slopes, spread


def write_bench(out: Path, rows, slopes, spread) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# reference complexity per outer iteration: {config.REFERENCE_COMPLEXITY}\n")
        w = _csv_writer(fh, BENCH_FIELDS)
        for r in rows:
            w.writerow({k: fmt(v) for k, v in r.items()})
    with side_path(out, "slopes").open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# reference complexity per outer iteration: {config.REFERENCE_COMPLEXITY}\n")
        w = _csv_writer(fh, SLOPE_FIELDS)
        for r in slopes:
            w.writerow({k: fmt(v) for k, v in r.items()})
    with side_path(out, "spread").open("w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh, SPREAD_FIELDS)
        for r in spread:
            w.writerow({k: fmt(v) for k, v in r.items()})


# ==========================================================
# Single-trial helpers
# ==========================================================
def dump_subproblem(cfg: SystemConfig, chan, options: SolveOptions, path: Path) -> None:
    """First SCA program at the pipeline's initial point (b = b_max, greedy beams, theta = 1)."""
    chan_n = normalized(cfg, chan)
    D = dft_codebook(chan_n.n_ap, cfg.n_beams)
    comb = CombinerState(D, greedy_selection(D, chan_n.g, cfg.n_rf), cfg.b_max)
    theta = np.ones(chan_n.n_ris, dtype=complex)
    U, _ = optimize_decoders(chan_n, comb, theta, 1.0, cfg.aqnm_mode, options=options.mm)
    prog = first_subproblem(chan_n, comb, theta, U, 1.0, cfg.aqnm_mode, options.sca)
    path.write_text(prog.to_text(), encoding="utf-8")
    logger.info(f"Subproblem with {prog.n} variables written to {path}")


def write_sca_trace(report: SolveReport, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh, SCA_TRACE_FIELDS)
        for outer, trace in enumerate(report.sca_traces):
            for it in trace:
                w.writerow({"outer": outer, "sca_iteration": it.n, "objective": fmt(it.objective),
                            "b": fmt(it.b), "violation": fmt(it.violation)})


def _open_out(out: Optional[str]):
    if out is None:
        return sys.stdout, False
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    return open(out, "w", newline="", encoding="utf-8"), True


def cmd_run(args, cfg: SystemConfig, options: SolveOptions) -> int:
    seed = trial_seed(cfg.seed, args.trial)
    trial = draw_trial(cfg, seed)
    if args.dump_channels:
        write_channels(args.dump_channels, trial.chan, trial.direct)
        logger.info(f"Channels written to {args.dump_channels}")
    if args.dump_subproblem:
        dump_subproblem(cfg, trial.chan, options, Path(args.dump_subproblem))

    outcome = run_trial(TrialJob(0, cfg, args.scheme, "none", None, args.trial, options))
    fh, close = _open_out(args.out)
    try:
        _csv_writer(fh, TRIAL_FIELDS).writerow(outcome.row)
    finally:
        if close:
            fh.close()
    if outcome.report is not None:
        rep = outcome.report
        logger.info(f"[RUN] {args.scheme} trial {args.trial}: ASR {rep.sum_rate:.4f} bits/s/Hz, b={rep.bits}, "
                    f"beams={rep.beams}, "
                    f"{rep.iterations} outer iterations ({rep.status})")
        if rep.flags:
            logger.warning(f"[RUN] block flags: {', '.join(rep.flags)}")
        if args.sca_trace:
            write_sca_trace(rep, Path(args.sca_trace))
    return 0 if outcome.ok else 1


def cmd_trace(args, cfg: SystemConfig, options: SolveOptions) -> int:
    seed = trial_seed(cfg.seed, args.trial)
    trial = draw_trial(cfg, seed)
    report = registry().get(args.scheme).run(cfg, trial, options)
    fh, close = _open_out(args.out)
    try:
        w = _csv_writer(fh, TRACE_FIELDS)
        for j, value in enumerate(report.trace):
            w.writerow({"iteration": j, "sum_rate": fmt(value)})
    finally:
        if close:
            fh.close()
    if args.sca_trace:
        write_sca_trace(report, Path(args.sca_trace))
    logger.info(f"[TRACE] {len(report.trace)} points, final relaxed ASR {report.trace[-1]:.4f}, status {report.status}")
    return 0


def _sweep_values(text: str) -> Tuple[int, ...]:
    parts = _split(text or "")
    if not parts:
        raise ConfigError("--values needs at least one integer", field="values")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"--values must be comma-separated integers, got {text!r}", field="values") from None


def cmd_sweep(args, cfg: SystemConfig, options: SolveOptions) -> int:
    values = _sweep_values(args.values) if args.param != "none" else (None,)
    sweep = SweepSpec(args.param, values, args.trials, tuple(_split(args.scheme)), Path(args.out or "sweep.csv"))
    scenario_text = config_text(cfg)
    return run_sweep(sweep, cfg, options, args.jobs, None if args.no_db else args.db, scenario_text)


def cmd_bench(args, cfg: SystemConfig, options: SolveOptions) -> int:
    dims = _split(args.dims)
    factors = [float(f) for f in args.factors.split(",")]
    rows = bench_complexity(cfg, dims, factors, args.repeats, replace(options, max_outer=args.bench_outer))
    slopes, spread = fit_slopes(rows)
    write_bench(Path(args.out or "bench.csv"), rows, slopes, spread)
    for s in slopes:
        logger.info(f"[BENCH] {s['dim']:>8} {s['block']:>4}: slope {s['slope']:.3f} over {s['points']} points")
    logger.info(f"[BENCH] reference: {config.REFERENCE_COMPLEXITY}")
    return 0


def cmd_history(args, cfg: SystemConfig, options: SolveOptions) -> int:
    if args.sweep is None:
        for s in asyncio.run(list_sweeps(args.db)):
            print(f"{s['sweep_id']:>5}  {s['param']:>6}  {','.join(s['schemes']):<30} {s['n_trials']} trials")
        return 0
    rows = asyncio.run(get_sweep_rows(args.sweep, path=args.db))
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]) if rows else ["scheme"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return 0


COMMANDS = {"run": cmd_run, "trace": cmd_trace, "sweep": cmd_sweep, "bench": cmd_bench, "history": cmd_history}


# ==========================================================
# Argument parsing
# ==========================================================
def _split(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help=f"scenario file (default {config.DEFAULT_SCENARIO} if present)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a scenario key")
    common.add_argument("--aqnm-mode", choices=AQNM_MODES, default=None)
    common.add_argument("--out", default=None, help="output CSV")
    common.add_argument("--verbose", action="store_true", help="DEBUG output on the console")
    common.add_argument("--tol", type=float, default=1e-4, help="outer stopping tolerance in bits/s/Hz")
    common.add_argument("--max-outer", type=int, default=30)
    common.add_argument("--round-each-iter", action="store_true", help="round bits and project beams inside every outer iteration")
    common.add_argument("--paper-literal-17", action="store_true", help="use the printed AGM linearization of the binarity constraint")
    common.add_argument("--bit-coupling", choices=("enumerate", "linearized"), default="enumerate")
    common.add_argument("--b-fixed", type=int, default=None, help="pin the ADC resolution")
    common.add_argument("--fd-grad", action="store_true", help="finite-difference phase gradients")
    common.add_argument("--conjugate", action="store_true", help="Polak-Ribiere directions in the phase block")

    parser = argparse.ArgumentParser(prog="risadc", description="RIS-aided uplink with resolution-adaptive ADCs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="single trial")
    p.add_argument("--scheme", default="bcd")
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--dump-channels", default=None, metavar="PATH")
    p.add_argument("--dump-subproblem", default=None, metavar="PATH")
    p.add_argument("--sca-trace", default=None, metavar="PATH")

    p = sub.add_parser("trace", parents=[common], help="outer objective per iteration for one trial")
    p.add_argument("--scheme", default="bcd")
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--sca-trace", default=None, metavar="PATH")

    p = sub.add_parser("sweep", parents=[common], help="Monte-Carlo sweep")
    p.add_argument("--param", choices=SWEEP_PARAMS, default="none")
    p.add_argument("--values", default="", help="comma separated values of the swept parameter")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--scheme", default="bcd", help="comma separated scheme names")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--db", default=config.RESULTS_DB)
    p.add_argument("--no-db", action="store_true")

    p = sub.add_parser("bench", parents=[common], help="per-block complexity benchmark")
    p.add_argument("--dims", default=",".join(BENCH_DIMS))
    p.add_argument("--factors", default="1,2,4")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--bench-outer", type=int, default=2, help="outer iterations per timed solve")

    p = sub.add_parser("history", parents=[common], help="list stored sweeps or dump one")
    p.add_argument("--db", default=config.RESULTS_DB)
    p.add_argument("--sweep", type=int, default=None)
    return parser


def scenario_from_args(args) -> SystemConfig:
    path = args.config
    if path is None and Path(config.DEFAULT_SCENARIO).exists():
        path = config.DEFAULT_SCENARIO
    cfg = load_config(path) if path else SystemConfig()
    cfg = apply_overrides(cfg, args.set)
    if args.aqnm_mode:
        cfg = replace(cfg, aqnm_mode=args.aqnm_mode)
    return cfg


def options_from_args(args) -> SolveOptions:
    return SolveOptions(
        tol=args.tol,
        max_outer=args.max_outer,
        round_each_iter=args.round_each_iter,
        b_fixed=args.b_fixed,
        sca=ScaOptions(literal_17=args.paper_literal_17, bit_coupling=args.bit_coupling),
        mm=MmOptions(),
        mo=MoOptions(fd_grad=args.fd_grad, conjugate=args.conjugate),
    )


# ==========================================================
# MAIN RUNNER
# ==========================================================
def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        set_console_level(logging.DEBUG)

    try:
        cfg = scenario_from_args(args)
        options = options_from_args(args)
        if getattr(args, "scheme", None) and args.command in ("run", "trace"):
            registry().get(args.scheme)
        return COMMANDS[args.command](args, cfg, options)
    except (ConfigError, ChannelFileError, KeyError, OSError) as e:
        logger.critical(f"Fatal error: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
