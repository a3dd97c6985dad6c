import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError

from config import Config
from src.errors import DimensionMismatchError
from src.models import SignalDistribution, SignalSpec
from src.seeding import Seed
from src.siggen import l1_distance, sample_signal


@settings(max_examples=200, deadline=None)
@given(N=st.integers(1, 300), data=st.data(), dist=st.sampled_from(list(SignalDistribution)),
       master=st.integers(0, 2**64 - 1))
def test_signals_are_exactly_k_sparse_positive_unit_norm(N, data, dist, master):
    k = data.draw(st.integers(1, N))
    x = sample_signal(SignalSpec(N=N, k=k, dist=dist), Seed(master=master))
    dense = x.dense()
    assert np.count_nonzero(dense) == k
    assert np.all(x.values > 0)
    assert np.all(np.diff(x.support) > 0)
    assert abs(np.linalg.norm(dense) - 1.0) <= 1e-12


def test_full_support():
    x = sample_signal(SignalSpec(N=5, k=5), seed=1)
    assert np.array_equal(x.support, np.arange(5))
    assert abs(np.linalg.norm(x.values) - 1.0) <= 1e-12


@pytest.mark.parametrize("dist", list(SignalDistribution))
def test_one_dimensional_signal_is_one(dist):
    x = sample_signal(SignalSpec(N=1, k=1, dist=dist), seed=2)
    assert np.array_equal(x.dense(), [1.0])


def test_supports_are_uniform():
    root = Seed(master=3)
    draws = 30_000
    counts = dict.fromkeys(itertools.combinations(range(4), 2), 0)
    for i in range(draws):
        x = sample_signal(SignalSpec(N=4, k=2), root.derive("signal", i))
        counts[tuple(int(j) for j in x.support)] += 1
    for count in counts.values():
        assert abs(count / draws - 1 / 6) <= 0.01


def test_sampling_is_deterministic():
    spec = SignalSpec(N=50, k=7, dist=SignalDistribution.ABS_NORMAL)
    a = sample_signal(spec, seed=4)
    b = sample_signal(spec, seed=4)
    assert np.array_equal(a.support, b.support)
    assert a.values.tobytes() == b.values.tobytes()


def test_sparsity_above_dimension_rejected():
    with pytest.raises(ValidationError):
        SignalSpec(N=3, k=4)


def test_l1_distance_examples():
    x = np.array([0.6, 0.8, 0.0])
    assert l1_distance(x, x) == 0.0
    assert l1_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 2.0
    error = l1_distance(x, np.array([0.6, 0.8, 1e-9]))
    assert error == pytest.approx(1e-9)
    assert error <= Config.SUCCESS_TOL


def test_l1_distance_accepts_sparse_signal():
    x = sample_signal(SignalSpec(N=10, k=3), seed=5)
    assert l1_distance(x, x.dense()) == 0.0


def test_l1_distance_length_mismatch():
    with pytest.raises(DimensionMismatchError):
        l1_distance(np.zeros(3), np.zeros(4))
