"""
Sensing matrix ensembles.

All generators are pure functions of (spec, seed) and return read-only
float64 arrays.
"""
import logging

import numpy as np
from scipy import sparse

from src.errors import ParameterError
from src.models import EnsembleKind, EnsembleSpec
from src.seeding import as_seed

log = logging.getLogger("sparse_sense.matgen")


def uniform_open(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws on the open interval (0, 1); exact zeros are redrawn"""
    values = rng.random(size)
    zeros = values == 0.0
    while np.any(zeros):
        values[zeros] = rng.random(int(zeros.sum()))
        zeros = values == 0.0
    return values


def abs_normal(rng: np.random.Generator, size) -> np.ndarray:
    """|z| for standard normal z, with exact zeros redrawn"""
    values = np.abs(rng.standard_normal(size))
    zeros = values == 0.0
    while np.any(zeros):
        values[zeros] = np.abs(rng.standard_normal(int(zeros.sum())))
        zeros = values == 0.0
    return values


def _partial_circulant(rng: np.random.Generator, n: int, N: int) -> np.ndarray:
    # Row r of the circulant is the generator cyclically shifted right by r.
    generator = rng.standard_normal(N)
    rows = rng.choice(N, size=n, replace=False)
    shift = (np.arange(N)[None, :] - rows[:, None]) % N
    return generator[shift]


def generate(spec: EnsembleSpec, seed) -> np.ndarray:
    """Draw an n x N matrix from the ensemble described by `spec`."""
    seed = as_seed(seed)
    rng = seed.rng()
    shape = (spec.n, spec.N)

    if spec.kind == EnsembleKind.ABS_NORMAL:
        matrix = abs_normal(rng, shape)
    elif spec.kind == EnsembleKind.UNIFORM01:
        matrix = uniform_open(rng, shape)
    elif spec.kind == EnsembleKind.BERNOULLI:
        if spec.p is None or not 0.0 <= spec.p <= 1.0:
            raise ParameterError(f"Bernoulli probability must lie in [0, 1], got {spec.p!r}")
        matrix = (rng.random(shape) < spec.p).astype(np.float64)
    elif spec.kind == EnsembleKind.ALL_ONES:
        matrix = np.ones(shape)
    elif spec.kind == EnsembleKind.IDENTITY:
        matrix = np.eye(spec.n, spec.N)
    elif spec.kind == EnsembleKind.PARTIAL_CIRCULANT:
        if spec.n > spec.N:
            raise ParameterError(f"cannot sample {spec.n} distinct rows from {spec.N} circulant rows")
        matrix = _partial_circulant(rng, spec.n, spec.N)
    else:
        raise ParameterError(f"Unknown ensemble: {spec.kind}")

    matrix.setflags(write=False)
    log.debug("generate: kind=%s shape=%dx%d seed=%d path=%s", spec.kind.value, spec.n, spec.N, seed.master, seed.path)
    return matrix


def density(M) -> float:
    """Proportion of non-zero entries, for dense or sparse matrices"""
    rows, cols = M.shape
    total = rows * cols
    if total == 0:
        return 0.0
    if sparse.issparse(M):
        return np.count_nonzero(M.data) / total
    return np.count_nonzero(np.asarray(M)) / total


def identity(N: int) -> np.ndarray:
    """Read-only N x N identity, the trivial always-recovering sensing matrix"""
    matrix = np.eye(N)
    matrix.setflags(write=False)
    return matrix


