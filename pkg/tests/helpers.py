"""Shared builders for the test suite"""
import itertools

import numpy as np


def unit_columns(rng: np.random.Generator, n: int, N: int) -> np.ndarray:
    """Random Gaussian matrix with unit l2 columns"""
    M = rng.standard_normal((n, N))
    return M / np.linalg.norm(M, axis=0)


def vertex_optimum(A: np.ndarray, y: np.ndarray, tol: float = 1e-9) -> float:
    """min 1^T x over Ax = y, x >= 0 by enumerating every basis"""
    n, N = A.shape
    best = np.inf
    for basis in itertools.combinations(range(N), n):
        B = A[:, basis]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xB = np.linalg.solve(B, y)
        if np.all(xB >= -tol):
            best = min(best, float(xB.sum()))
    return best
