"""
Greedy recovery (OMP, CoSaMP) and the trial wrapper shared by all three
algorithms.

Both greedy methods are told the true sparsity k. Ties in proxy magnitude go
to the lowest column index so replays are exact.
"""
import logging
import time
from dataclasses import replace
from typing import Optional

import numpy as np

from src.errors import SparseSenseError
from src.lpsolve import recover_l1
from src.models import Algorithm, GreedyOpts, SolverSettings
from src.numkit import as_operator, lstsq_on_support, matvec, rmatvec
from src.outcome import RecoveryOutcome, failed_outcome, make_outcome
from src.siggen import SparseSignal

log = logging.getLogger("sparse_sense.recover")

HALT_TOL = "tol"
HALT_SPARSITY = "k_reached"
HALT_STAGNATION = "stagnation"
HALT_MAX_ITERS = "max_iters"


def _largest(values: np.ndarray, count: int) -> np.ndarray:
    """Indices of the `count` largest |values|, lowest index first among ties"""
    order = np.argsort(-np.abs(values), kind="stable")
    return order[:count]


def omp(Phi, y, opts: GreedyOpts, truth=None) -> RecoveryOutcome:
    """Orthogonal Matching Pursuit: k rounds of picking the column most
    correlated with the residual, each followed by a least-squares refit on
    the support so far. Stops early once |r| <= residual_tol * |y|."""
    started = time.perf_counter()
    Phi = as_operator(Phi)
    y = np.asarray(y, dtype=np.float64)
    N = Phi.shape[1]
    tol = opts.residual_tol * np.linalg.norm(y)

    support: list = []
    selected = np.zeros(N, dtype=bool)
    residual = y.copy()
    coefficients = np.zeros(0)
    deficient = False
    halt = HALT_SPARSITY
    iterations = 0

    for _ in range(min(opts.k, N)):
        if np.linalg.norm(residual) <= tol:
            halt = HALT_TOL
            break
        proxy = np.abs(rmatvec(Phi, residual))
        proxy[selected] = -1.0
        j = int(np.argmax(proxy))
        support.append(j)
        selected[j] = True
        fit = lstsq_on_support(Phi, support, y)
        coefficients, residual = fit.coefficients, fit.residual
        deficient = deficient or fit.rank_deficient
        iterations += 1
    else:
        if np.linalg.norm(residual) <= tol:
            halt = HALT_TOL

    xhat = np.zeros(N)
    xhat[np.asarray(support, dtype=np.intp)] = coefficients
    return make_outcome(xhat, truth, iterations, time.perf_counter() - started, halt, deficient)


def cosamp(Phi, y, opts: GreedyOpts, truth=None) -> RecoveryOutcome:
    """Compressive Sampling Matching Pursuit.

    Each iteration merges the 2k largest proxy entries with the current
    support, fits by least squares on the merged set (at most 3k columns),
    prunes to the k largest coefficients and recomputes the residual. Halts on
    residual tolerance, stagnation (relative decrease below stagnation_tol for
    stagnation_patience iterations running) or max_iters.
    """
    started = time.perf_counter()
    Phi = as_operator(Phi)
    y = np.asarray(y, dtype=np.float64)
    N = Phi.shape[1]
    k = min(opts.k, N)
    y_norm = np.linalg.norm(y)
    tol = opts.residual_tol * y_norm

    xhat = np.zeros(N)
    residual = y.copy()
    residual_norm = y_norm
    stalled = 0
    deficient = False
    halt = HALT_MAX_ITERS
    iterations = 0

    if residual_norm <= tol:
        return make_outcome(xhat, truth, 0, time.perf_counter() - started, HALT_TOL)

    for _ in range(opts.max_iters):
        iterations += 1
        proxy = rmatvec(Phi, residual)
        merged = np.union1d(_largest(proxy, min(2 * k, N)), np.flatnonzero(xhat))
        fit = lstsq_on_support(Phi, merged, y)
        deficient = deficient or fit.rank_deficient

        keep = _largest(fit.coefficients, k)
        xhat = np.zeros(N)
        xhat[merged[keep]] = fit.coefficients[keep]
        residual = y - matvec(Phi, xhat)
        new_norm = np.linalg.norm(residual)

        if new_norm <= tol:
            halt = HALT_TOL
            break
        if new_norm > residual_norm * (1.0 - opts.stagnation_tol):
            stalled += 1
            if stalled >= opts.stagnation_patience:
                halt = HALT_STAGNATION
                break
        else:
            stalled = 0
        residual_norm = new_norm

    return make_outcome(xhat, truth, iterations, time.perf_counter() - started, halt, deficient)


def run_trial(Phi, x: SparseSignal, algo: Algorithm, settings: Optional[SolverSettings] = None) -> RecoveryOutcome:
    """Measure y = Phi x, recover with `algo` and score against x.

    Wall time covers the recovery call only. Algorithm failures come back as
    unsuccessful outcomes tagged with the error type.
    """
    settings = settings or SolverSettings()
    Phi = as_operator(Phi)
    y = matvec(Phi, x.dense())
    algo = Algorithm(algo)

    started = time.perf_counter()
    try:
        if algo == Algorithm.LP:
            outcome = recover_l1(Phi, y, settings.lp, truth=x)
        elif algo == Algorithm.OMP:
            outcome = omp(Phi, y, settings.cosamp.for_sparsity(x.k), truth=x)
        else:
            outcome = cosamp(Phi, y, settings.cosamp.for_sparsity(x.k), truth=x)
    except (SparseSenseError, np.linalg.LinAlgError, ValueError) as exc:
        elapsed = time.perf_counter() - started
        log.warning("run_trial: %s failed at k=%d: %s", algo.value, x.k, exc)
        return failed_outcome(x.N, x, type(exc).__name__, elapsed)
    return replace(outcome, wall_time=time.perf_counter() - started)
