import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from config import Config
from src import lpsolve
from src.errors import DimensionMismatchError
from src.lpsolve import LpProblem, LpStatus, recover_l1, solve
from src.models import EnsembleKind, EnsembleSpec, LpOptions, SignalSpec
from src.numkit import matvec
from src.seeding import Seed
from src.siggen import sample_signal
from src.threshold import MatrixSource
from tests.helpers import vertex_optimum


def assert_certified(problem: LpProblem, solution, opts: LpOptions = LpOptions()):
    A = problem.A.toarray() if sparse.issparse(problem.A) else problem.A
    scale = max(1.0, float(np.abs(problem.y).max()))
    assert solution.status == LpStatus.OPTIMAL
    assert np.max(np.abs(A @ solution.x - problem.y)) <= opts.feas_tol * scale
    assert np.all(solution.x >= -1e-10)
    assert solution.min_reduced_cost >= -opts.rc_tol


def test_identity_system():
    problem = LpProblem(np.eye(3), np.array([1.0, 2.0, 3.0]))
    solution = solve(problem)
    assert_certified(problem, solution)
    assert np.allclose(solution.x, [1.0, 2.0, 3.0])
    assert solution.objective == pytest.approx(6.0)


def test_degenerate_optimum_reports_objective():
    problem = LpProblem(np.array([[1.0, 1.0]]), np.array([1.0]))
    solution = solve(problem)
    assert_certified(problem, solution)
    assert solution.objective == pytest.approx(1.0)
    assert sorted(np.round(solution.x, 12)) == [0.0, 1.0]


@settings(max_examples=500, deadline=None)
@given(n=st.integers(1, 5), extra=st.integers(0, 5), seed=st.integers(0, 2**32 - 1))
def test_matches_vertex_enumeration(n, extra, seed):
    N = n + extra
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, N))
    x0 = np.where(rng.random(N) < 0.5, rng.random(N), 0.0)
    y = A @ x0
    problem = LpProblem(A, y)
    solution = solve(problem)
    assert_certified(problem, solution)
    assert solution.objective <= x0.sum() + 1e-8
    assert abs(solution.objective - vertex_optimum(A, y)) <= 1e-8


def test_random_four_by_eight_instances(rng):
    for _ in range(20):
        A = rng.standard_normal((4, 8))
        x0 = rng.random(8)
        problem = LpProblem(A, A @ x0)
        solution = solve(problem)
        assert_certified(problem, solution)
        assert abs(solution.objective - vertex_optimum(A, problem.y)) <= 1e-8


def test_sparse_and_dense_inputs_agree(rng):
    dense = rng.random((10, 30))
    dense[rng.random((10, 30)) < 0.6] = 0.0
    dense[0] += 0.1  # every column keeps an entry
    x0 = np.zeros(30)
    x0[[2, 11, 17]] = [0.3, 0.5, 0.2]
    y = dense @ x0
    from_dense = solve(LpProblem(dense, y))
    from_sparse = solve(LpProblem(sparse.csc_matrix(dense), y))
    assert from_dense.objective == pytest.approx(from_sparse.objective, abs=1e-10)


def test_small_pricing_window_and_refactoring(rng):
    A = rng.standard_normal((5, 40))
    x0 = np.zeros(40)
    x0[[3, 9]] = [0.7, 0.4]
    problem = LpProblem(A, A @ x0)
    opts = LpOptions(pricing_window=3, refactor_every=2, bland_after=1)
    solution = solve(problem, opts)
    assert_certified(problem, solution, opts)
    assert abs(solution.objective - vertex_optimum(A, problem.y)) <= 1e-8


def test_negative_right_hand_side_rows_are_flipped():
    A = np.array([[-1.0, -2.0, 0.0], [0.0, 1.0, 1.0]])
    x0 = np.array([1.0, 0.5, 0.25])
    problem = LpProblem(A, A @ x0)
    solution = solve(problem)
    assert_certified(problem, solution)
    assert abs(solution.objective - vertex_optimum(A, problem.y)) <= 1e-8


def test_redundant_rows_are_tolerated():
    A = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    y = A @ np.array([0.5, 0.5, 0.5])
    solution = solve(LpProblem(A, y))
    assert solution.status == LpStatus.OPTIMAL
    assert np.allclose(A @ solution.x, y)
    assert solution.objective == pytest.approx(1.0)


def test_infeasible_system():
    solution = solve(LpProblem(np.array([[1.0, 1.0]]), np.array([-1.0])))
    assert solution.status == LpStatus.INFEASIBLE
    assert not solution.optimal


def test_iteration_limit():
    solution = solve(LpProblem(np.eye(3), np.array([1.0, 2.0, 3.0])), LpOptions(max_iters=1))
    assert solution.status == LpStatus.ITERATION_LIMIT
    assert solution.iterations == 1


def test_problem_validation():
    with pytest.raises(DimensionMismatchError):
        LpProblem(np.eye(3), np.ones(2))


def test_recover_l1_on_identity():
    x = sample_signal(SignalSpec(N=64, k=9), seed=3)
    outcome = recover_l1(np.eye(64), x.dense(), truth=x)
    assert outcome.success
    assert outcome.l1_error <= 1e-12
    assert outcome.halt_reason == "optimal"


def test_recover_l1_without_truth_has_no_verdict():
    outcome = recover_l1(np.eye(4), np.array([0.0, 1.0, 0.0, 0.0]))
    assert outcome.l1_error is None
    assert not outcome.success


def test_zero_right_hand_side_gives_zero():
    A = np.abs(np.random.default_rng(4).standard_normal((6, 15)))
    problem = LpProblem(A, np.zeros(6))
    solution = solve(problem)
    assert_certified(problem, solution)
    assert not solution.x.any()


def test_degenerate_positive_instance(rng):
    A = np.abs(rng.standard_normal((20, 60)))
    A /= np.linalg.norm(A, axis=0)
    x0 = np.zeros(60)
    x0[[4, 31]] = [0.6, 0.8]
    problem = LpProblem(A, A @ x0)
    solution = solve(problem, LpOptions(bland_after=1))
    assert_certified(problem, solution)
    assert solution.objective <= x0.sum() + 1e-8


@pytest.mark.parametrize("density", [1.0, 0.1])
def test_hundred_by_thousand_instances_reach_optimal(density):
    source = MatrixSource(ensemble=EnsembleSpec(kind=EnsembleKind.ABS_NORMAL, n=100, N=1000), density=density)
    for trial in range(3):
        seed = Seed(master=11).derive("trial", 5, trial)
        Phi = source.build(seed)
        x = sample_signal(SignalSpec(N=1000, k=5), seed.derive("signal"))
        problem = LpProblem(Phi, matvec(Phi, x.dense()))
        solution = solve(problem)
        assert_certified(problem, solution)
        assert solution.iterations < Config.lp_max_iters(100, 1000)
        assert solution.objective <= x.dense().sum() + 1e-8


@settings(max_examples=300, deadline=None)
@given(n=st.integers(1, 5), extra=st.integers(0, 5), seed=st.integers(0, 2**32 - 1), spread=st.floats(0.0, 6.0))
def test_badly_scaled_columns_never_reported_optimal_without_certificates(n, extra, seed, spread):
    N = n + extra
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, N)) * 10.0 ** rng.uniform(-spread, spread, N)
    x0 = np.where(rng.random(N) < 0.5, rng.random(N), 0.0)
    problem = LpProblem(A, A @ x0)
    solution = solve(problem)
    if solution.optimal:
        assert_certified(problem, solution)


def test_failed_certificate_is_not_reported_optimal(monkeypatch):
    primal = lpsolve._RevisedSimplex.primal

    def shifted(self):
        x = primal(self)
        x[0] -= 1e-3
        return x

    monkeypatch.setattr(lpsolve._RevisedSimplex, "primal", shifted)
    problem = LpProblem(np.eye(3), np.array([1.0, 2.0, 3.0]))
    assert solve(problem).status == LpStatus.NUMERICAL
    assert recover_l1(np.eye(3), problem.y).halt_reason == "numerical"
