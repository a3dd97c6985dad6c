"""
t-recovery threshold R_t and its staged Monte Carlo estimate.

R_t is the largest k at which recovery succeeds with probability exceeding t.
The staged scan runs 50 trials per k from k = 1 until the first k0 with fewer
than ceil(50 t) successes, restarts three below k0 with 200 trials per k until
k1, restarts three below k1 with 1000 trials per k until k2, and reports
r_hat = k2 - 1.
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

from src.errors import CeilingReachedError, ParameterError
from src.matgen import generate, identity
from src.models import (
    Algorithm,
    EnsembleSpec,
    SignalDistribution,
    SignalSpec,
    SolverSettings,
    ThresholdEstimate,
    ThresholdOptions,
    TraceEntry,
)
from src.recover import run_trial
from src.seeding import Seed, as_seed
from src.siggen import sample_signal
from src.sparsifier import sparsify

log = logging.getLogger("sparse_sense.threshold")

Oracle = Callable[[int, int], bool]


def required_successes(trials: int, t: float) -> int:
    """Successes needed at a stage to count as recovering with probability > t"""
    return math.ceil(trials * t - 1e-9)


def _count_successes(oracle: Oracle, k: int, first: int, trials: int, mapper) -> int:
    indices = range(first, first + trials)
    return int(sum(bool(s) for s in mapper(oracle, [k] * trials, indices)))


def estimate(trial_oracle: Oracle, t: float, opts: Optional[ThresholdOptions] = None,
             ceiling: Optional[int] = None, mapper=map) -> ThresholdEstimate:
    """Staged linear scan for R_t.

    `trial_oracle(k, i)` must be deterministic in (k, i). Each stage draws
    from its own range of trial indices. `mapper` may be an executor's map for
    parallel trials; results do not depend on it.
    """
    if not 0.0 < t < 1.0:
        raise ParameterError(f"threshold probability must lie in (0, 1), got {t}")
    opts = opts or ThresholdOptions()
    ceiling = ceiling or opts.ceiling
    if ceiling is None:
        raise ParameterError("estimate needs a k ceiling")

    trace: List[TraceEntry] = []
    stops: List[int] = []
    first_index = 0
    start = 1
    for trials in opts.stage_trials:
        need = required_successes(trials, t)
        k = start
        while True:
            if k > ceiling:
                log.info("estimate: ceiling %d reached in %d-trial stage", ceiling, trials)
                raise CeilingReachedError(ceiling, trace)
            successes = _count_successes(trial_oracle, k, first_index, trials, mapper)
            trace.append(TraceEntry(k=k, stage=trials, trials=trials, successes=successes))
            log.debug("estimate: stage=%d k=%d successes=%d/%d", trials, k, successes, trials)
            if successes < need:
                break
            k += 1
        stops.append(k)
        first_index += trials
        start = max(1, k - opts.backoff)

    while len(stops) < 3:
        stops.insert(0, stops[0])
    k0, k1, k2 = stops[-3:]
    result = ThresholdEstimate(t=t, r_hat=k2 - 1, k0=k0, k1=k1, k2=k2, trace=trace)
    log.info("estimate: r_hat=%d k0=%d k1=%d k2=%d consistent=%s", result.r_hat, k0, k1, k2, result.consistent)
    return result


def estimate_bisect(trial_oracle: Oracle, t: float, opts: Optional[ThresholdOptions] = None,
                    ceiling: Optional[int] = None, mapper=map) -> ThresholdEstimate:
    """Fast mode: doubling then bisection on k at the final-stage trial count.

    Assumes success probability is non-increasing in k. Not used for
    acceptance runs, where the staged scan is reproduced as is.
    """
    if not 0.0 < t < 1.0:
        raise ParameterError(f"threshold probability must lie in (0, 1), got {t}")
    opts = opts or ThresholdOptions()
    ceiling = ceiling or opts.ceiling
    if ceiling is None:
        raise ParameterError("estimate_bisect needs a k ceiling")
    trials = opts.stage_trials[-1]
    need = required_successes(trials, t)
    trace: List[TraceEntry] = []
    verdicts = {}

    def passes(k: int) -> bool:
        if k not in verdicts:
            successes = _count_successes(trial_oracle, k, 0, trials, mapper)
            trace.append(TraceEntry(k=k, stage=trials, trials=trials, successes=successes))
            verdicts[k] = successes >= need
        return verdicts[k]

    good, bad = 0, 1
    while passes(bad):
        good = bad
        if bad >= ceiling:
            raise CeilingReachedError(ceiling, trace)
        bad = min(2 * bad, ceiling)
    while bad - good > 1:
        mid = (good + bad) // 2
        if passes(mid):
            good = mid
        else:
            bad = mid
    return ThresholdEstimate(t=t, r_hat=good, k0=bad, k1=bad, k2=bad, trace=trace, mode="bisect")


def write_trace_csv(result: ThresholdEstimate, path) -> Path:
    """Trace as CSV with columns k, stage, trials, successes"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["k", "stage", "trials", "successes"])
        for entry in result.trace:
            writer.writerow([entry.k, entry.stage, entry.trials, entry.successes])
    return path


# ============================================================================
# MATRIX-BACKED ORACLES
# ============================================================================

@dataclass
class MatrixSource:
    """Where trial matrices come from.

    Either an explicit `matrix` (always fixed), or an ensemble sparsified to
    relative `density`, drawn fresh for every trial or once for the whole run.
    """
    ensemble: Optional[EnsembleSpec] = None
    density: float = 1.0
    fresh: bool = True
    matrix: Optional[object] = None
    renormalize: bool = True

    def __post_init__(self):
        if (self.ensemble is None) == (self.matrix is None):
            raise ParameterError("MatrixSource needs exactly one of ensemble or matrix")
        if not 0.0 < self.density <= 1.0:
            raise ParameterError(f"density must lie in (0, 1], got {self.density}")

    @property
    def shape(self):
        if self.matrix is not None:
            return self.matrix.shape
        return (self.ensemble.n, self.ensemble.N)

    def build(self, seed: Seed):
        """Sensing matrix for the given matrix-level seed"""
        if self.matrix is not None:
            return self.matrix
        base = generate(self.ensemble, seed.derive("matrix"))
        sm = sparsify(base, seed.derive("mask"), s=self.density,
                      renormalize=self.renormalize, base=self.ensemble.label)
        if sm.mask.t < sm.mask.n:
            return sm.matrix
        # Full mask: return the dense array
        dense = sm.toarray()
        dense.setflags(write=False)
        return dense


@dataclass
class TrialOracle:
    """Picklable (k, trial index) -> success, seeded only by (master, k, index)"""
    source: MatrixSource
    algorithm: Algorithm
    seed: Seed
    settings: SolverSettings = field(default_factory=SolverSettings)
    signal_dist: SignalDistribution = SignalDistribution.UNIFORM01
    _fixed: Optional[object] = field(default=None, init=False, repr=False)

    def matrix_for(self, trial_seed: Seed):
        if self.source.fresh and self.source.matrix is None:
            return self.source.build(trial_seed)
        if self._fixed is None:
            self._fixed = self.source.build(self.seed.derive("matrix", 0))
        return self._fixed

    def __getstate__(self):
        # Workers rebuild the fixed matrix from the seed instead of receiving it.
        state = dict(self.__dict__)
        if self.source.matrix is None:
            state["_fixed"] = None
        return state

    def __call__(self, k: int, index: int) -> bool:
        trial_seed = self.seed.derive("threshold", k, index)
        Phi = self.matrix_for(trial_seed)
        x = sample_signal(SignalSpec(N=Phi.shape[1], k=k, dist=self.signal_dist), trial_seed.derive("signal"))
        return run_trial(Phi, x, self.algorithm, self.settings).success


def estimate_for_matrix(source: MatrixSource, algo: Algorithm, t: float, seed,
                        opts: Optional[ThresholdOptions] = None,
                        settings: Optional[SolverSettings] = None,
                        signal_dist: SignalDistribution = SignalDistribution.UNIFORM01,
                        mapper=map) -> ThresholdEstimate:
    """Estimate R_t for a fixed matrix or an ensemble at a given density."""
    opts = opts or ThresholdOptions()
    oracle = TrialOracle(
        source=source,
        algorithm=Algorithm(algo),
        seed=as_seed(seed),
        settings=settings or SolverSettings(),
        signal_dist=signal_dist,
    )
    ceiling = opts.ceiling or source.shape[0]
    runner = estimate_bisect if opts.fast else estimate
    return runner(oracle, t, opts, ceiling=ceiling, mapper=mapper)


def identity_source(N: int) -> MatrixSource:
    return MatrixSource(matrix=identity(N))

