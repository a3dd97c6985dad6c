import csv
import pickle
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy import sparse

from src.errors import CeilingReachedError, ParameterError
from src.models import Algorithm, EnsembleKind, EnsembleSpec, ThresholdOptions
from src.seeding import Seed
from src.threshold import (
    MatrixSource,
    TrialOracle,
    estimate,
    estimate_bisect,
    estimate_for_matrix,
    identity_source,
    required_successes,
    write_trace_csv,
)


def step_oracle(K):
    return lambda k, i: k <= K


def coin_oracle(k, i):
    return bool(np.random.default_rng([k, i]).random() < 0.5)


@pytest.mark.parametrize("trials,t,expected", [(50, 0.98, 49), (200, 0.98, 196), (1000, 0.98, 980), (50, 0.5, 25)])
def test_required_successes(trials, t, expected):
    assert required_successes(trials, t) == expected


@pytest.mark.parametrize("K", [1, 5, 25, 199])
@pytest.mark.parametrize("t", [0.5, 0.98])
def test_step_oracle_recovered_exactly(K, t):
    result = estimate(step_oracle(K), t, ceiling=400)
    assert result.r_hat == K
    assert (result.k0, result.k1, result.k2) == (K + 1, K + 1, K + 1)
    assert result.consistent


def test_stage_restarts_back_off_three():
    K = 25
    result = estimate(step_oracle(K), 0.98, ceiling=400)
    by_stage = {}
    for entry in result.trace:
        by_stage.setdefault(entry.stage, []).append(entry.k)
    assert list(by_stage) == [50, 200, 1000]
    assert by_stage[50][0] == 1
    assert by_stage[200][0] == max(1, result.k0 - 3)
    assert by_stage[1000][0] == max(1, result.k1 - 3)
    assert by_stage[1000][-1] == result.k2
    stages = [entry.stage for entry in result.trace]
    assert stages == sorted(stages)


def test_restart_clamps_to_one():
    result = estimate(step_oracle(1), 0.98, ceiling=10)
    assert [e.k for e in result.trace if e.stage == 200][0] == 1


def test_trace_counts_successes():
    result = estimate(step_oracle(3), 0.98, ceiling=10)
    first = result.trace[0]
    assert (first.k, first.trials, first.successes) == (1, 50, 50)
    last = result.trace[-1]
    assert (last.k, last.trials, last.successes) == (4, 1000, 0)
    assert result.total_trials == sum(e.trials for e in result.trace)


def test_always_succeeding_oracle_hits_ceiling():
    with pytest.raises(CeilingReachedError) as excinfo:
        estimate(lambda k, i: True, 0.98, ceiling=40)
    assert excinfo.value.ceiling == 40
    assert excinfo.value.trace[-1].k == 40


def test_fair_coin_oracle_gives_zero():
    result = estimate(coin_oracle, 0.98, ceiling=50)
    assert result.r_hat == 0
    assert result.k0 == 1


def test_estimate_is_reproducible():
    a = estimate(coin_oracle, 0.5, ceiling=50)
    b = estimate(coin_oracle, 0.5, ceiling=50)
    assert a == b


def test_each_stage_draws_fresh_trial_indices():
    seen = []
    estimate(lambda k, i: seen.append((k, i)) or k <= 2, 0.98, ceiling=10)
    per_stage_indices = {}
    for k, i in seen:
        per_stage_indices.setdefault(k, set()).add(i)
    assert per_stage_indices[1] == set(range(1250))


def test_parallel_mapper_matches_serial():
    with ThreadPoolExecutor(max_workers=4) as pool:
        parallel = estimate(coin_oracle, 0.5, ceiling=50, mapper=pool.map)
    assert parallel == estimate(coin_oracle, 0.5, ceiling=50)


@pytest.mark.parametrize("t", [0.0, 1.0, 1.5])
def test_probability_outside_open_interval_rejected(t):
    with pytest.raises(ParameterError):
        estimate(step_oracle(3), t, ceiling=10)


def test_bisect_mode_matches_step_oracle():
    result = estimate_bisect(step_oracle(37), 0.98, ceiling=200)
    assert result.r_hat == 37
    assert result.mode == "bisect"
    with pytest.raises(CeilingReachedError):
        estimate_bisect(lambda k, i: True, 0.98, ceiling=16)


def test_identity_matrix_never_fails():
    with pytest.raises(CeilingReachedError) as excinfo:
        estimate_for_matrix(identity_source(64), Algorithm.LP, 0.98, seed=1)
    assert excinfo.value.ceiling == 64


def test_small_ensemble_estimate():
    source = MatrixSource(ensemble=EnsembleSpec(kind=EnsembleKind.ABS_NORMAL, n=20, N=60), density=0.5)
    opts = ThresholdOptions(stage_trials=[10, 20])
    a = estimate_for_matrix(source, Algorithm.COSAMP, 0.9, seed=5, opts=opts)
    b = estimate_for_matrix(source, Algorithm.COSAMP, 0.9, seed=5, opts=opts)
    assert a == b
    assert 0 <= a.r_hat < 20
    assert a.r_hat == a.k2 - 1


def test_fixed_mode_reuses_one_matrix():
    source = MatrixSource(ensemble=EnsembleSpec(kind=EnsembleKind.UNIFORM01, n=10, N=30), fresh=False)
    oracle = TrialOracle(source=source, algorithm=Algorithm.OMP, seed=Seed(master=3))
    first = oracle.matrix_for(Seed(master=3).derive("threshold", 1, 0))
    second = oracle.matrix_for(Seed(master=3).derive("threshold", 2, 7))
    assert first is second


def test_oracle_pickles_without_its_fixed_matrix():
    source = MatrixSource(ensemble=EnsembleSpec(kind=EnsembleKind.UNIFORM01, n=10, N=30), fresh=False)
    oracle = TrialOracle(source=source, algorithm=Algorithm.OMP, seed=Seed(master=3))
    verdict = oracle(2, 0)
    clone = pickle.loads(pickle.dumps(oracle))
    assert clone._fixed is None
    assert clone(2, 0) == verdict
    assert np.array_equal(clone.matrix_for(None), oracle.matrix_for(None))


def test_full_density_builds_a_dense_matrix():
    spec = EnsembleSpec(kind=EnsembleKind.ABS_NORMAL, n=12, N=40)
    dense = MatrixSource(ensemble=spec, density=1.0).build(Seed(master=4))
    assert isinstance(dense, np.ndarray)
    assert not dense.flags.writeable
    assert np.allclose(np.linalg.norm(dense, axis=0), 1.0, atol=1e-12)

    sparsified = MatrixSource(ensemble=spec, density=0.25).build(Seed(master=4))
    assert sparse.issparse(sparsified)
    assert sparsified.getnnz() == 3 * 40


def test_matrix_source_needs_exactly_one_origin():
    with pytest.raises(ParameterError):
        MatrixSource()
    with pytest.raises(ParameterError):
        MatrixSource(ensemble=EnsembleSpec(kind=EnsembleKind.ALL_ONES, n=2, N=2), density=0.0)


def test_write_trace_csv(tmp_path):
    result = estimate(step_oracle(2), 0.98, ceiling=10)
    path = write_trace_csv(result, tmp_path / "trace.csv")
    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["k", "stage", "trials", "successes"]
    assert rows[1] == ["1", "50", "50", "50"]
    assert len(rows) == len(result.trace) + 1
