"""
Numeric kernels shared by the recovery algorithms.

Matrices are either dense numpy arrays or scipy CSC matrices. The sparse path
only touches stored entries, so a product with a matrix holding d non-zeros
per column costs O(dN).
"""
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from config import Config
from src.errors import DimensionMismatchError, EnumerationGuardError, ParameterError

log = logging.getLogger("sparse_sense.numkit")

_RIP_BATCH = 4096


def as_operator(M):
    """Normalize to a dense float array or a canonical CSC matrix"""
    if sparse.issparse(M):
        csc = sparse.csc_matrix(M)
        if not csc.has_sorted_indices:
            csc.sort_indices()
        return csc
    return np.asarray(M, dtype=np.float64)


def matvec(M, x) -> np.ndarray:
    """M @ x"""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != M.shape[1]:
        raise DimensionMismatchError(f"matvec: matrix is {M.shape[0]}x{M.shape[1]}, vector has shape {x.shape}")
    return np.asarray(M @ x).ravel()


def rmatvec(M, r) -> np.ndarray:
    """M^T @ r"""
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 1 or r.shape[0] != M.shape[0]:
        raise DimensionMismatchError(f"rmatvec: matrix is {M.shape[0]}x{M.shape[1]}, vector has shape {r.shape}")
    return np.asarray(M.T @ r).ravel()


def submatrix(M, support) -> np.ndarray:
    """Dense copy of the columns of M listed in `support`"""
    support = np.asarray(support, dtype=np.intp)
    if sparse.issparse(M):
        return M[:, support].toarray()
    return np.asarray(M)[:, support]


@dataclass(frozen=True)
class LeastSquaresResult:
    """Least-squares fit of y on the columns in `support`"""
    support: np.ndarray
    coefficients: np.ndarray
    residual: np.ndarray
    residual_norm: float
    rank: int
    rank_deficient: bool = False


def lstsq_on_support(M, support, y) -> LeastSquaresResult:
    """Minimize |y - M_T c|_2 over c.

    Uses a column-pivoted Householder QR. When the pivoted R reveals a rank
    drop the fit falls back to the minimum-norm solution and is flagged.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != M.shape[0]:
        raise DimensionMismatchError(f"lstsq_on_support: y has length {y.shape[0]}, matrix has {M.shape[0]} rows")
    support = np.asarray(support, dtype=np.intp)
    if support.size == 0:
        return LeastSquaresResult(support, np.zeros(0), y.copy(), float(np.linalg.norm(y)), 0)

    A = submatrix(M, support)
    q, r, perm = linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(A.shape) * np.finfo(np.float64).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.count_nonzero(diag > tol))

    if rank == support.size:
        coeffs = np.empty(support.size)
        coeffs[perm] = linalg.solve_triangular(r, q.T @ y)
        deficient = False
    else:
        coeffs = linalg.lstsq(A, y, lapack_driver="gelsd")[0]
        deficient = True
        log.debug("lstsq_on_support: rank %d < %d columns, using minimum-norm fit", rank, support.size)

    residual = y - A @ coeffs
    return LeastSquaresResult(
        support=support,
        coefficients=coeffs,
        residual=residual,
        residual_norm=float(np.linalg.norm(residual)),
        rank=rank,
        rank_deficient=deficient,
    )


def rip_epsilon(M, k: int, limit: int = Config.RIP_ENUMERATION_LIMIT) -> float:
    """Smallest eps with (1-eps)|v|^2 <= |Mv|^2 <= (1+eps)|v|^2 for all k-sparse v.

    Exhaustive over all C(N, k) supports, so only for tiny matrices.
    """
    N = M.shape[1]
    if not 1 <= k <= N:
        raise ParameterError(f"rip_epsilon: k must lie in [1, {N}], got {k}")
    count = math.comb(N, k)
    if count > limit:
        raise EnumerationGuardError(count, limit)

    A = M.toarray() if sparse.issparse(M) else np.asarray(M, dtype=np.float64)
    gram = A.T @ A
    worst = 0.0
    supports = itertools.combinations(range(N), k)
    while True:
        batch = np.array(list(itertools.islice(supports, _RIP_BATCH)), dtype=np.intp)
        if batch.size == 0:
            break
        blocks = gram[batch[:, :, None], batch[:, None, :]]
        eigs = np.linalg.eigvalsh(blocks)
        deviation = np.maximum(1.0 - eigs[:, 0], eigs[:, -1] - 1.0)
        worst = max(worst, float(deviation.max()))
    return max(worst, 0.0)
