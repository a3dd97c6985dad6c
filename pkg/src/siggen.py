"""
k-sparse, non-negative, unit-norm test signals.
"""
from dataclasses import dataclass
from typing import Union

import numpy as np

from src.errors import DimensionMismatchError, ParameterError
from src.matgen import abs_normal, uniform_open
from src.models import SignalDistribution, SignalSpec
from src.seeding import as_seed


@dataclass(frozen=True)
class SparseSignal:
    """Exactly k positive entries at sorted `support`, unit l2 norm"""
    N: int
    support: np.ndarray
    values: np.ndarray

    @property
    def k(self) -> int:
        return int(self.support.size)

    def dense(self) -> np.ndarray:
        x = np.zeros(self.N)
        x[self.support] = self.values
        return x


def sample_signal(spec: SignalSpec, seed) -> SparseSignal:
    """Support uniform over all C(N, k) subsets, values i.i.d. from spec.dist,
    then the whole vector scaled to unit l2 norm."""
    if not 1 <= spec.k <= spec.N:
        raise ParameterError(f"sparsity k={spec.k} must lie in [1, {spec.N}]")
    rng = as_seed(seed).rng()
    support = np.sort(rng.choice(spec.N, size=spec.k, replace=False))
    if spec.dist == SignalDistribution.UNIFORM01:
        values = uniform_open(rng, spec.k)
    else:
        values = abs_normal(rng, spec.k)
    values = values / np.linalg.norm(values)
    support.setflags(write=False)
    values.setflags(write=False)
    return SparseSignal(N=spec.N, support=support, values=values)


def l1_distance(x: Union[SparseSignal, np.ndarray], xhat) -> float:
    """sum_i |x_i - xhat_i|"""
    if isinstance(x, SparseSignal):
        x = x.dense()
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise DimensionMismatchError(f"l1_distance: lengths differ ({x.shape} vs {xhat.shape})")
    return float(np.abs(x - xhat).sum())
