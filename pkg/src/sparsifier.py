"""
Sparsification Sp(Phi, s).

A Mask places exactly t ones in every column, at rows chosen uniformly
without replacement and independently per column. Applying it keeps Phi on
the mask support, zeroes everything else and (by default) rescales every
column to unit l2 norm. Results are stored column-compressed.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from config import Config
from src.errors import DegenerateColumnError, DimensionMismatchError, ParameterError, UndefinedRatioError
from src.matgen import density
from src.seeding import Seed, as_seed

log = logging.getLogger("sparse_sense.sparsifier")


@dataclass(frozen=True)
class Mask:
    """{0,1} pattern with exactly t ones per column.

    `support` has shape (N, t): row indices of column j, sorted ascending.
    """
    n: int
    N: int
    t: int
    support: np.ndarray
    seed: Optional[Seed] = None

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.to_sparse().sum(axis=0)).ravel()

    def to_sparse(self) -> sparse.csc_matrix:
        data = np.ones(self.N * self.t)
        indptr = np.arange(0, self.N * self.t + 1, self.t)
        return sparse.csc_matrix((data, self.support.ravel(), indptr), shape=(self.n, self.N))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def with_column(self, j: int, rows: np.ndarray) -> "Mask":
        support = self.support.copy()
        support[j] = np.sort(rows)
        support.setflags(write=False)
        return Mask(self.n, self.N, self.t, support, self.seed)


@dataclass(frozen=True)
class SparsifiedMatrix:
    """Phi' = Phi * S, optionally column-normalized.

    `column_norms` holds the pre-normalization l2 norm of every column; the
    stored values were divided by it. They are all ones when not normalized.
    """
    matrix: sparse.csc_matrix
    mask: Mask
    column_norms: np.ndarray
    renormalized: bool
    base: str = "explicit"

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def t_from_density(s: float, n: int) -> int:
    """Ones per column for relative density s, t = round(s * n)"""
    if not 0.0 < s <= 1.0:
        raise ParameterError(f"relative density must lie in (0, 1], got {s}")
    t = int(round(s * n))
    if t < 1:
        raise ParameterError(f"density {s} leaves no entries in a column of height {n}")
    return t


def _check_count(n: int, N: int, t: int):
    if n < 1 or N < 1:
        raise ParameterError(f"mask shape must be positive, got {n}x{N}")
    if not 1 <= t <= n:
        raise ParameterError(f"ones per column must lie in [1, {n}], got {t}")


def make_mask(n: int, N: int, t: int, seed) -> Mask:
    """Exact-count random mask: t uniformly placed ones in every column."""
    _check_count(n, N, t)
    seed = as_seed(seed)
    rng = seed.rng()
    rows = np.tile(np.arange(n), (N, 1))
    support = np.sort(rng.permuted(rows, axis=1)[:, :t], axis=1)
    support.setflags(write=False)
    return Mask(n, N, t, support, seed)


def _resample_column(mask: Mask, j: int, attempt: int) -> np.ndarray:
    rng = mask.seed.derive("resample", j, attempt).rng()
    return rng.choice(mask.n, size=mask.t, replace=False)


def _masked_values(Phi: np.ndarray, support: np.ndarray) -> np.ndarray:
    # (N, t): value of Phi at each support row of each column
    return Phi[support, np.arange(support.shape[0])[:, None]]


def apply(Phi, S: Mask, renormalize: bool = True, base: str = "explicit") -> SparsifiedMatrix:
    """Entry-wise product Phi * S, column-normalized when `renormalize` is set.

    A column that masks to all zeros gets fresh mask draws (up to
    Config.MASK_RESAMPLE_LIMIT) when normalizing; if the mask has no seed or
    the draws run out, DegenerateColumnError names the column.
    """
    if sparse.issparse(Phi):
        Phi = Phi.toarray()
    Phi = np.asarray(Phi, dtype=np.float64)
    if Phi.shape != (S.n, S.N):
        raise DimensionMismatchError(f"matrix is {Phi.shape[0]}x{Phi.shape[1]}, mask is {S.n}x{S.N}")

    values = _masked_values(Phi, S.support)
    if renormalize:
        dead = np.flatnonzero(~np.any(values != 0.0, axis=1))
        for j in dead:
            S, values = _revive_column(Phi, S, values, int(j))

    N, t = S.N, S.t
    indptr = np.arange(0, N * t + 1, t)
    matrix = sparse.csc_matrix((values.ravel().copy(), S.support.ravel().copy(), indptr), shape=(S.n, N))
    matrix.eliminate_zeros()
    matrix.sort_indices()

    if renormalize:
        norms = sparse_linalg.norm(matrix, axis=0)
        counts = np.diff(matrix.indptr)
        matrix.data /= np.repeat(norms, counts)
    else:
        norms = np.ones(N)

    return SparsifiedMatrix(matrix=matrix, mask=S, column_norms=np.asarray(norms), renormalized=renormalize, base=base)


def _revive_column(Phi: np.ndarray, S: Mask, values: np.ndarray, j: int):
    if S.seed is None:
        raise DegenerateColumnError(j, 0)
    limit = Config.MASK_RESAMPLE_LIMIT
    for attempt in range(limit):
        rows = _resample_column(S, j, attempt)
        if np.any(Phi[rows, j] != 0.0):
            S = S.with_column(j, rows)
            values = values.copy()
            values[j] = Phi[S.support[j], j]
            log.info("apply: resampled column=%d attempts=%d", j, attempt + 1)
            return S, values
    raise DegenerateColumnError(j, limit)


def sparsify(Phi, seed, s: Optional[float] = None, t: Optional[int] = None,
             renormalize: bool = True, base: str = "explicit") -> SparsifiedMatrix:
    """Draw a mask for relative density s (or an explicit count t) and apply it"""
    n, N = Phi.shape
    if t is None:
        if s is None:
            raise ParameterError("sparsify needs either s or t")
        t = t_from_density(s, n)
    return apply(Phi, make_mask(n, N, t, seed), renormalize=renormalize, base=base)


def relative_density(inner: Union[SparsifiedMatrix, np.ndarray], outer) -> float:
    """delta(inner) / delta(outer)"""
    outer_density = density(outer)
    if outer_density == 0.0:
        raise UndefinedRatioError("relative density is undefined for a matrix with no non-zero entries")
    inner_matrix = inner.matrix if isinstance(inner, SparsifiedMatrix) else inner
    return density(inner_matrix) / outer_density


# ============================================================================
# TEXT FORMAT
# ============================================================================
# Header "n N t", then one line per column: the count followed by row:value
# pairs over the mask support. Values are written with repr precision.

def dump_sparsified(sm: SparsifiedMatrix, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mask = sm.mask
    lookup = sm.matrix
    with open(path, "w") as f:
        f.write(f"{mask.n} {mask.N} {mask.t}\n")
        for j in range(mask.N):
            start, stop = lookup.indptr[j], lookup.indptr[j + 1]
            stored = dict(zip(lookup.indices[start:stop].tolist(), lookup.data[start:stop].tolist()))
            pairs = " ".join(f"{int(i)}:{stored.get(int(i), 0.0)!r}" for i in mask.support[j])
            f.write(f"{mask.t} {pairs}\n")
    log.info("dump_sparsified: wrote %dx%d t=%d to %s", mask.n, mask.N, mask.t, path)
    return path


def load_sparsified(path) -> SparsifiedMatrix:
    path = Path(path)
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 3:
            raise ParameterError(f"{path}: header must be 'n N t', got {' '.join(header)!r}")
        n, N, t = (int(v) for v in header)
        _check_count(n, N, t)
        support = np.empty((N, t), dtype=np.intp)
        values = np.empty((N, t))
        for j in range(N):
            fields = f.readline().split()
            if not fields or int(fields[0]) != t or len(fields) != t + 1:
                raise ParameterError(f"{path}: column {j} does not list exactly {t} entries")
            for slot, pair in enumerate(fields[1:]):
                row, value = pair.split(":", 1)
                support[j, slot] = int(row)
                values[j, slot] = float(value)
    order = np.argsort(support, axis=1)
    support = np.take_along_axis(support, order, axis=1)
    values = np.take_along_axis(values, order, axis=1)
    support.setflags(write=False)
    mask = Mask(n, N, t, support)
    indptr = np.arange(0, N * t + 1, t)
    matrix = sparse.csc_matrix((values.ravel(), support.ravel().copy(), indptr), shape=(n, N))
    matrix.eliminate_zeros()
    return SparsifiedMatrix(matrix=matrix, mask=mask, column_norms=np.ones(N), renormalized=False, base=str(path))
