"""
Experiment harness: recovery sweeps, threshold runs and report recipes.

Every trial is seeded from (master seed, k, trial index) only, so the same
cell produces the same rows whether trials run in-process or on a worker
pool, and every (density, algorithm) cell at a given (k, trial) sees the same
base matrix and signal.
"""
import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from functools import lru_cache, partial
from pathlib import Path
from typing import Iterator, List, Tuple

import pandas as pd
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from config import Config
from src.errors import CeilingReachedError, ParameterError, ReportInputError
from src.experiment_loader import ExperimentConfig, MatrixMode
from src.models import (
    Algorithm,
    EnsembleSpec,
    SignalDistribution,
    SignalSpec,
    SolverSettings,
    ThresholdEstimate,
    TrialRecord,
)
from src.recover import run_trial
from src.run_tracker import RunTracker
from src.seeding import Seed
from src.siggen import sample_signal
from src.threshold import MatrixSource, estimate_for_matrix, write_trace_csv

log = logging.getLogger("sparse_sense.bench")
console = Console()

TRIAL_COLUMNS = [
    "schema_version", "experiment_id", "ensemble", "n", "N", "density", "algorithm",
    "k", "trial", "seed", "success", "l1_error", "wall_time_s", "iterations", "halt_reason",
]

THRESHOLD_COLUMNS = [
    "schema_version", "experiment_id", "ensemble", "n", "N", "density", "algorithm",
    "t", "r_hat", "k0", "k1", "k2", "consistent", "total_trials", "status", "mode",
]

STATUS_OK = "ok"
STATUS_CEILING = "ceiling_reached"


# ============================================================================
# TRIALS
# ============================================================================

@dataclass(frozen=True)
class TrialTask:
    """Everything a worker needs to run one trial"""
    experiment_id: str
    ensemble: EnsembleSpec
    density: float
    algorithm: Algorithm
    k: int
    trial: int
    master: int
    fixed: bool
    signal_dist: SignalDistribution
    settings: SolverSettings
    record_timing: bool = True


@lru_cache(maxsize=32)
def _fixed_matrix(ensemble: EnsembleSpec, density: float, master: int):
    # One matrix per (ensemble, density) for the whole run, cached per process.
    return MatrixSource(ensemble=ensemble, density=density, fresh=False).build(
        Seed(master=master).derive("matrix", 0)
    )


def execute_trial(task: TrialTask) -> TrialRecord:
    """Run one trial. Top-level so worker processes can unpickle it."""
    trial_seed = Seed(master=task.master).derive("trial", task.k, task.trial)
    if task.fixed:
        Phi = _fixed_matrix(task.ensemble, task.density, task.master)
    else:
        Phi = MatrixSource(ensemble=task.ensemble, density=task.density).build(trial_seed)

    spec = SignalSpec(N=task.ensemble.N, k=task.k, dist=task.signal_dist)
    x = sample_signal(spec, trial_seed.derive("signal"))
    outcome = run_trial(Phi, x, task.algorithm, task.settings)

    return TrialRecord(
        experiment_id=task.experiment_id,
        ensemble=task.ensemble.label,
        n=task.ensemble.n,
        N=task.ensemble.N,
        density=task.density,
        algorithm=task.algorithm,
        k=task.k,
        trial=task.trial,
        seed=task.master,
        success=int(outcome.success),
        l1_error=outcome.l1_error,
        wall_time_s=outcome.wall_time if task.record_timing else None,
        iterations=outcome.iterations,
        halt_reason=outcome.halt_reason,
    )


def iter_trials(cfg: ExperimentConfig) -> Iterator[TrialTask]:
    """The full grid in output order: shape, density, algorithm, k, trial"""
    fixed = cfg.matrix_mode == MatrixMode.FIXED
    settings = cfg.solver_settings
    for ensemble in cfg.shapes():
        for density in cfg.densities:
            for algorithm in cfg.algorithms:
                for k in cfg.sparsity_grid():
                    if k > ensemble.N:
                        continue
                    for trial in range(cfg.trials):
                        yield TrialTask(
                            experiment_id=cfg.experiment_id,
                            ensemble=ensemble,
                            density=density,
                            algorithm=algorithm,
                            k=k,
                            trial=trial,
                            master=cfg.seed,
                            fixed=fixed,
                            signal_dist=cfg.signal_dist,
                            settings=settings,
                            record_timing=cfg.record_timing,
                        )


def _trial_row(record: TrialRecord) -> list:
    return [
        Config.CSV_SCHEMA_VERSION,
        record.experiment_id,
        record.ensemble,
        record.n,
        record.N,
        repr(record.density),
        record.algorithm.value,
        record.k,
        record.trial,
        record.seed,
        record.success,
        repr(record.l1_error),
        "" if record.wall_time_s is None else repr(record.wall_time_s),
        record.iterations,
        record.halt_reason,
    ]


@contextmanager
def _mapper(workers: int):
    """Ordered map over trials, in-process or on a process pool"""
    if workers <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as executor:
        yield partial(executor.map, chunksize=16)


def _progress(enabled: bool) -> Progress:
    return Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        disable=not enabled,
    )


@dataclass
class SweepResult:
    trials_csv: Path
    summary_csv: Path
    tracker: RunTracker

    @property
    def rows(self) -> int:
        return self.tracker.get_total_trials()


def run_sweep(cfg: ExperimentConfig, workers: int = 1, progress: bool = True) -> SweepResult:
    """Run the density x algorithm x k x trial grid.

    Writes trials.csv (one row per attempted trial, errored trials included)
    and summary.csv under <output>/<experiment_id>/.
    """
    run_dir = cfg.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    trials_csv = run_dir / "trials.csv"
    tasks = list(iter_trials(cfg))
    tracker = RunTracker(timed=cfg.record_timing)
    log.info("run_sweep: experiment=%r trials=%d workers=%d out=%s", cfg.experiment_id, len(tasks), workers, run_dir)

    with open(trials_csv, "w", newline="") as f, _mapper(workers) as mapper, _progress(progress) as bar:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRIAL_COLUMNS)
        task_id = bar.add_task(cfg.experiment_id, total=len(tasks))
        for record in mapper(execute_trial, tasks):
            writer.writerow(_trial_row(record))
            tracker.record(record)
            bar.advance(task_id)

    summary_csv = tracker.write_summary_csv(run_dir / "summary.csv")
    log.info("run_sweep: wrote %s and %s", trials_csv, summary_csv)
    return SweepResult(trials_csv=trials_csv, summary_csv=summary_csv, tracker=tracker)


# ============================================================================
# THRESHOLDS
# ============================================================================

@dataclass
class ThresholdRun:
    """R_t estimate for one (shape, density, algorithm) cell"""
    ensemble: EnsembleSpec
    density: float
    algorithm: Algorithm
    estimate: ThresholdEstimate
    status: str = STATUS_OK

    @property
    def trace_name(self) -> str:
        e = self.ensemble
        return f"{e.label}_{e.n}x{e.N}_d{self.density:g}_{self.algorithm.value}.csv"


def _ceiling_estimate(t: float, exc: CeilingReachedError) -> ThresholdEstimate:
    # r_hat is a lower bound here; k0..k2 point one past the ceiling.
    past = exc.ceiling + 1
    return ThresholdEstimate(t=t, r_hat=exc.ceiling, k0=past, k1=past, k2=past, trace=exc.trace, mode="ceiling")


def run_threshold(cfg: ExperimentConfig, workers: int = 1, progress: bool = True) -> List[ThresholdRun]:
    """Estimate R_t per (shape, density, algorithm); writes thresholds.csv and traces/"""
    run_dir = cfg.run_dir
    traces_dir = run_dir / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    cells = [(e, s, a) for e in cfg.shapes() for s in cfg.densities for a in cfg.algorithms]
    runs: List[ThresholdRun] = []
    log.info("run_threshold: experiment=%r cells=%d t=%g workers=%d", cfg.experiment_id, len(cells), cfg.t, workers)

    with _mapper(workers) as mapper, _progress(progress) as bar:
        task_id = bar.add_task(cfg.experiment_id, total=len(cells))
        for ensemble, density, algorithm in cells:
            source = MatrixSource(ensemble=ensemble, density=density, fresh=cfg.matrix_mode == MatrixMode.FRESH)
            try:
                result = estimate_for_matrix(
                    source, algorithm, cfg.t, Seed(master=cfg.seed),
                    opts=cfg.threshold,
                    settings=cfg.solver_settings,
                    signal_dist=cfg.signal_dist,
                    mapper=mapper,
                )
                run = ThresholdRun(ensemble, density, algorithm, result)
            except CeilingReachedError as exc:
                log.warning("run_threshold: %s %dx%d density=%g %s: %s",
                            ensemble.label, ensemble.n, ensemble.N, density, algorithm.value, exc)
                run = ThresholdRun(ensemble, density, algorithm, _ceiling_estimate(cfg.t, exc), STATUS_CEILING)
            write_trace_csv(run.estimate, traces_dir / run.trace_name)
            runs.append(run)
            bar.advance(task_id)

    _write_thresholds(cfg, runs, run_dir / "thresholds.csv")
    return runs


def _write_thresholds(cfg: ExperimentConfig, runs: List[ThresholdRun], path: Path) -> Path:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(THRESHOLD_COLUMNS)
        for run in runs:
            est = run.estimate
            writer.writerow([
                Config.CSV_SCHEMA_VERSION,
                cfg.experiment_id,
                run.ensemble.label,
                run.ensemble.n,
                run.ensemble.N,
                repr(run.density),
                run.algorithm.value,
                repr(est.t),
                est.r_hat,
                est.k0,
                est.k1,
                est.k2,
                int(est.consistent),
                est.total_trials,
                run.status,
                est.mode,
            ])
    log.info("run_threshold: wrote %s", path)
    return path


# ============================================================================
# REPORTS
# ============================================================================

SERIES_COLUMNS = ["series", "x", "y"]
DIFFERENCE_COLUMNS = ["ensemble", "n", "N", "algorithm", "dense_density", "sparse_density",
                      "k_hat", "dense_rate", "sparse_rate"]


def max_performance_difference(summary: pd.DataFrame, dense_density: float, sparse_density: float,
                               algorithm) -> Tuple[int, float, float]:
    """Sparsity at which sparsification helps most.

    Returns (k_hat, dense success rate, sparse success rate) for the k that
    maximizes sparse rate minus dense rate; the lowest such k wins ties.
    """
    algorithm = Algorithm(algorithm).value
    cells = summary[summary["algorithm"] == algorithm]
    dense = cells[cells["density"] == dense_density].set_index("k")["success_rate"]
    sparse_ = cells[cells["density"] == sparse_density].set_index("k")["success_rate"]
    common = dense.index.intersection(sparse_.index).sort_values()
    if common.empty:
        raise ParameterError(
            f"no sparsity has both density {dense_density:g} and {sparse_density:g} for {algorithm}"
        )
    gain = sparse_.loc[common] - dense.loc[common]
    k_hat = int(gain.idxmax())
    return k_hat, float(dense.loc[k_hat]), float(sparse_.loc[k_hat])


def _series_label(frame: pd.DataFrame, *parts: str) -> pd.Series:
    label = frame[parts[0]].astype(str)
    for part in parts[1:]:
        label = label + "@" + frame[part].map(lambda v: f"{v:g}" if isinstance(v, float) else str(v))
    return label


def _write_series(frame: pd.DataFrame, path: Path, columns=SERIES_COLUMNS) -> Path:
    frame.reindex(columns=columns).to_csv(path, sep="\t", index=False, lineterminator="\n")
    log.info("report: wrote %s (%d rows)", path, len(frame))
    return path


def _shape_label(frame: pd.DataFrame) -> pd.Series:
    return frame["ensemble"] + "_" + frame["n"].astype(str) + "x" + frame["N"].astype(str)


def _recovery_reports(summary: pd.DataFrame, out_dir: Path) -> List[Path]:
    written = []
    summary = summary.assign(shape=_shape_label(summary))

    curves = summary.assign(series=_series_label(summary, "shape", "algorithm", "density"),
                            x=summary["k"], y=summary["success_rate"])
    written.append(_write_series(curves, out_dir / "recovery_curves.tsv"))

    timed = summary.dropna(subset=["mean_wall_time_s"])
    timing = timed.assign(series=_series_label(timed, "shape", "algorithm", "density"),
                          x=timed["k"], y=timed["mean_wall_time_s"])
    written.append(_write_series(timing, out_dir / "timing.tsv"))

    rows = []
    for (ensemble, n, N, algorithm), cells in summary.groupby(["ensemble", "n", "N", "algorithm"], sort=False):
        densities = sorted(cells["density"].unique())
        dense_density = densities[-1]
        for sparse_density in densities[:-1]:
            k_hat, dense_rate, sparse_rate = max_performance_difference(cells, dense_density, sparse_density, algorithm)
            rows.append([ensemble, n, N, algorithm, dense_density, sparse_density, k_hat, dense_rate, sparse_rate])
    difference = pd.DataFrame(rows, columns=DIFFERENCE_COLUMNS)
    written.append(_write_series(difference, out_dir / "performance_difference.tsv", DIFFERENCE_COLUMNS))
    return written


def _threshold_reports(thresholds: pd.DataFrame, out_dir: Path) -> List[Path]:
    written = []
    thresholds = thresholds.assign(shape=_shape_label(thresholds))

    by_density = thresholds.assign(series=_series_label(thresholds, "shape", "algorithm"),
                                   x=thresholds["density"], y=thresholds["r_hat"])
    written.append(_write_series(by_density, out_dir / "threshold_vs_density.tsv"))

    # Fixed-rows sweeps vary N, fixed-ratio sweeps vary n.
    x_axis = "N" if thresholds["n"].nunique() <= 1 else "n"
    by_dimension = thresholds.assign(series=_series_label(thresholds, "ensemble", "algorithm", "density"),
                                     x=thresholds[x_axis], y=thresholds["r_hat"])
    written.append(_write_series(by_dimension, out_dir / "threshold_vs_dimension.tsv"))
    return written


def report(input_dir, out_dir=None) -> List[Path]:
    """Turn summary.csv / thresholds.csv in `input_dir` into tab-separated
    plot-data files. Empty inputs give header-only files and a warning."""
    input_dir = Path(input_dir)
    out_dir = Path(out_dir) if out_dir is not None else input_dir / "report"
    summary_path = input_dir / "summary.csv"
    thresholds_path = input_dir / "thresholds.csv"
    if not summary_path.is_file() and not thresholds_path.is_file():
        raise ReportInputError(f"no summary.csv or thresholds.csv under {input_dir}")

    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    if summary_path.is_file():
        summary = pd.read_csv(summary_path)
        if summary.empty:
            log.warning("report: %s has no rows; writing empty series", summary_path)
        written += _recovery_reports(summary, out_dir)

    if thresholds_path.is_file():
        thresholds = pd.read_csv(thresholds_path)
        if thresholds.empty:
            log.warning("report: %s has no rows; writing empty series", thresholds_path)
        written += _threshold_reports(thresholds, out_dir)

    return written


def print_thresholds(runs: List[ThresholdRun]):
    """Rich table of threshold estimates"""
    table = Table(title="Recovery Thresholds")
    table.add_column("Ensemble", style="cyan")
    table.add_column("Density", justify="right", style="magenta")
    table.add_column("Algorithm", style="magenta")
    table.add_column("R_t", justify="right", style="green")
    table.add_column("k0 / k1 / k2", justify="right")
    table.add_column("Trials", justify="right", style="yellow")

    for run in runs:
        est = run.estimate
        r_hat = f">= {est.r_hat}" if run.status == STATUS_CEILING else str(est.r_hat)
        table.add_row(
            f"{run.ensemble.label} {run.ensemble.n}x{run.ensemble.N}",
            f"{run.density:g}",
            run.algorithm.value,
            r_hat,
            f"{est.k0} / {est.k1} / {est.k2}",
            f"{est.total_trials:,}",
        )
    console.print(table)
