"""
Revised simplex for the non-negative l1 problem

    minimize 1^T x  subject to  A x = y,  x >= 0.

Two phases: phase 1 starts from an all-artificial basis and minimizes the sum
of artificials; phase 2 minimizes 1^T x from the feasible basis it leaves.
The basis is held as a dense LU factorization plus an eta file of product-form
updates, refactorized every `refactor_every` pivots. Pricing is Dantzig's rule
over windows of `pricing_window` columns, so with a column-sparse A each
pricing pass only touches the stored entries of one window.

A k-sparse y leaves most basics at zero, so the vertices are highly
degenerate. When a pivot would make a zero-length step, the structural basics
sitting at zero are lifted by small random amounts and the working right-hand
side is shifted to B x_B; the lifted problem stays feasible and its steps are
positive. Once phase 2 is optimal for the lifted problem the true y is
restored and dual simplex pivots remove the negative basics this leaves
behind. After `bland_after` consecutive pivots without a relative objective
decrease the solver also switches to Bland's rule, and only leaves it once a
pivot decreases the objective again.

An Optimal status is only reported with its certificates checked: residual
within feas_tol * max(1, |y|_inf), x >= -1e-10, reduced costs >= -rc_tol.
"""
import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg, sparse

from config import Config
from src.errors import DimensionMismatchError, ParameterError, SolverError
from src.models import LpOptions
from src.numkit import as_operator
from src.outcome import RecoveryOutcome, make_outcome

log = logging.getLogger("sparse_sense.lpsolve")

_DEGENERATE_STEP = 1e-12
_TIE_TOL = 1e-12
_PROGRESS_TOL = 1e-9
_NONNEG_TOL = 1e-10
_CLEAN_TOL = 1e-11
_CLEANUP_ROUNDS = 3


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"
    NUMERICAL = "Numerical"


@dataclass(frozen=True)
class LpProblem:
    """min 1^T x  s.t.  A x = y, x >= 0"""
    A: object
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.ndim != 1 or y.shape[0] != self.A.shape[0]:
            raise DimensionMismatchError(f"LpProblem: A is {self.A.shape[0]}x{self.A.shape[1]}, y has shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ParameterError("LpProblem: right-hand side must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "A", as_operator(self.A))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.A.shape


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective: float
    status: LpStatus
    iterations: int
    wall_time: float
    basis: np.ndarray
    min_reduced_cost: Optional[float] = None
    phase1_iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


class _IterationLimit(Exception):
    pass


class _RevisedSimplex:
    """Single-use solver state. Variables 0..N-1 are structural, N..N+n-1
    artificial; artificials never re-enter once they leave the basis."""

    def __init__(self, A, b: np.ndarray, opts: LpOptions, max_iters: int):
        self.A = A
        self.b_true = b
        self.b = b.copy()
        self.opts = opts
        self.max_iters = max_iters
        self.n, self.N = A.shape
        self.iterations = 0
        self.basis = np.arange(self.N, self.N + self.n)
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.bland = False
        self.stalled = 0
        self.next_window = 0
        self.windows = self._build_windows()
        self.feas_scale = max(1.0, float(np.abs(b).max(initial=0.0)))
        self.lift = opts.perturbation * self.feas_scale
        self.perturbing = self.lift > 0.0
        self.rng = np.random.default_rng(Config.LP_PERTURB_SEED)
        self.perturbations = 0
        self.dual_pivots = 0
        self._factor()

    def _build_windows(self) -> List[Tuple[int, int, object]]:
        width = min(self.N, self.opts.pricing_window)
        windows = []
        for start in range(0, self.N, width):
            stop = min(start + width, self.N)
            windows.append((start, stop, self.A[:, start:stop].T))
        return windows

    # -- basis algebra --------------------------------------------------------

    def _column(self, j: int) -> np.ndarray:
        if j >= self.N:
            e = np.zeros(self.n)
            e[j - self.N] = 1.0
            return e
        if sparse.issparse(self.A):
            col = np.zeros(self.n)
            start, stop = self.A.indptr[j], self.A.indptr[j + 1]
            col[self.A.indices[start:stop]] = self.A.data[start:stop]
            return col
        return np.array(self.A[:, j], dtype=np.float64)

    def _basis_product(self, v: np.ndarray) -> np.ndarray:
        """B v"""
        structural = self.basis < self.N
        out = np.zeros(self.n)
        if structural.any():
            out += np.asarray(self.A[:, self.basis[structural]] @ v[structural]).ravel()
        out[self.basis[~structural] - self.N] += v[~structural]
        return out

    def _factor(self):
        B = np.column_stack([self._column(j) for j in self.basis])
        self.lu = linalg.lu_factor(B, check_finite=False)
        self.etas: List[Tuple[int, np.ndarray]] = []
        self.xB = self._ftran(self.b)

    def _ftran(self, v: np.ndarray) -> np.ndarray:
        z = linalg.lu_solve(self.lu, v, check_finite=False)
        for r, w in self.etas:
            zr = z[r] / w[r]
            z -= zr * w
            z[r] = zr
        return z

    def _btran(self, c: np.ndarray) -> np.ndarray:
        c = np.array(c, dtype=np.float64)
        for r, w in reversed(self.etas):
            c[r] = (c[r] - (w @ c - w[r] * c[r])) / w[r]
        return linalg.lu_solve(self.lu, c, trans=1, check_finite=False)

    def _pivot(self, r: int, q: int, w: np.ndarray, theta: float):
        self.xB -= theta * w
        self.xB[r] = theta
        leaving = self.basis[r]
        if leaving < self.N:
            self.is_basic[leaving] = False
        self.basis[r] = q
        self.is_basic[q] = True
        self.etas.append((r, w))
        self.iterations += 1
        if len(self.etas) >= self.opts.refactor_every:
            self._factor()

    # -- perturbation -----------------------------------------------------------

    def _perturb(self) -> bool:
        """Lift structural basics at or near zero and move the working
        right-hand side to B x_B. Returns False when there is nothing to lift."""
        rows = np.flatnonzero((self.basis < self.N) & (self.xB <= self.lift))
        if rows.size == 0:
            return False
        delta = np.zeros(self.n)
        delta[rows] = self.lift * self.rng.uniform(1.0, 2.0, rows.size)
        self.xB += delta
        self.b = self.b + self._basis_product(delta)
        self.perturbations += 1
        return True

    def restore(self):
        """Back to the true right-hand side, with one step of refinement"""
        self.b = self.b_true.copy()
        self._factor()
        self.xB += self._ftran(self.b - self._basis_product(self.xB))

    # -- pricing ---------------------------------------------------------------

    def _window_costs(self, window, pi: np.ndarray, cost: float) -> np.ndarray:
        start, stop, block = window
        d = cost - np.asarray(block @ pi).ravel()
        d[self.is_basic[start:stop]] = 0.0
        return d

    def _choose_entering(self, pi: np.ndarray, cost: float) -> Tuple[Optional[int], float]:
        tol = self.opts.rc_tol
        if self.bland:
            for window in self.windows:
                d = self._window_costs(window, pi, cost)
                candidates = np.flatnonzero(d < -tol)
                if candidates.size:
                    return window[0] + int(candidates[0]), float(d[candidates[0]])
            return None, 0.0

        count = len(self.windows)
        for offset in range(count):
            index = (self.next_window + offset) % count
            window = self.windows[index]
            d = self._window_costs(window, pi, cost)
            j = int(np.argmin(d))
            if d[j] < -tol:
                self.next_window = index
                return window[0] + j, float(d[j])
        return None, 0.0

    def _choose_leaving(self, w: np.ndarray, phase: int) -> Tuple[int, float]:
        tol = self.opts.pivot_tol
        ratios = np.full(self.n, np.inf)
        positive = w > tol
        ratios[positive] = np.maximum(self.xB[positive], 0.0) / w[positive]
        if phase == 2:
            # basic artificials sit on redundant rows and must stay at zero
            stuck = (self.basis >= self.N) & (np.abs(w) > tol)
            ratios[stuck] = 0.0
        theta = ratios.min()
        if not np.isfinite(theta):
            raise SolverError("simplex direction is unbounded; the l1 objective is bounded below, so the basis is corrupt")
        ties = np.flatnonzero(ratios <= theta + _TIE_TOL)
        if self.bland:
            r = int(ties[np.argmin(self.basis[ties])])
        else:
            r = int(ties[np.argmax(np.abs(w[ties]))])
        return r, float(ratios[r])

    # -- phases ------------------------------------------------------------------

    def _basic_costs(self, cost: float, artificial_cost: float) -> np.ndarray:
        return np.where(self.basis < self.N, cost, artificial_cost)

    def reset_pricing(self):
        self.bland = False
        self.stalled = 0

    def run_phase(self, phase: int, cost: float, artificial_cost: float):
        while True:
            costs = self._basic_costs(cost, artificial_cost)
            pi = self._btran(costs)
            q, dq = self._choose_entering(pi, cost)
            if q is None:
                return
            if self.iterations >= self.max_iters:
                raise _IterationLimit()
            w = self._ftran(self._column(q))
            r, theta = self._choose_leaving(w, phase)
            if theta <= _DEGENERATE_STEP and self.perturbing and self.basis[r] < self.N and self._perturb():
                r, theta = self._choose_leaving(w, phase)

            objective = float(costs @ self.xB)
            if -dq * theta > _PROGRESS_TOL * max(1.0, abs(objective)):
                self.stalled = 0
                self.bland = False
            else:
                self.stalled += 1
                if not self.bland and self.stalled >= self.opts.bland_after:
                    log.debug("simplex: %d pivots without progress, switching to Bland's rule", self.stalled)
                    self.bland = True
            self._pivot(r, q, w, theta)

    def drive_out_artificials(self):
        """Replace zero-level basic artificials by structural columns where the
        row allows it; rows that allow none are redundant and keep theirs."""
        for r in np.flatnonzero(self.basis >= self.N):
            e = np.zeros(self.n)
            e[r] = 1.0
            row = np.asarray(self.A.T @ self._btran(e)).ravel()
            row[self.is_basic] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) <= self.opts.pivot_tol:
                log.debug("simplex: row %d is redundant", r)
                continue
            w = self._ftran(self._column(j))
            self._pivot(int(r), j, w, 0.0)

    # -- dual cleanup --------------------------------------------------------------

    def _worst_row(self) -> Optional[int]:
        """Row of the most infeasible basic: a negative structural, or an
        artificial away from zero"""
        structural = self.basis < self.N
        violation = np.where(structural, -self.xB, np.abs(self.xB))
        limit = np.where(structural, _CLEAN_TOL, self.opts.feas_tol * self.feas_scale)
        violation[violation <= limit] = 0.0
        r = int(np.argmax(violation))
        return r if violation[r] > 0.0 else None

    def dual_cleanup(self) -> bool:
        """Dual simplex on the restored right-hand side. The basis is dual
        feasible, so each pivot keeps reduced costs nonnegative while moving
        one infeasible basic to its bound. False means y is infeasible."""
        while True:
            r = self._worst_row()
            if r is None:
                return True
            if self.iterations >= self.max_iters:
                raise _IterationLimit()
            e = np.zeros(self.n)
            e[r] = 1.0
            alpha = np.asarray(self.A.T @ self._btran(e)).ravel()
            alpha[self.is_basic] = 0.0
            # x_r moves by -alpha_j per unit of x_j; it must rise when negative
            direction = 1.0 if self.xB[r] < 0.0 else -1.0
            candidates = np.flatnonzero(direction * alpha < -self.opts.pivot_tol)
            if candidates.size == 0:
                if abs(self.xB[r]) <= self.opts.feas_tol * self.feas_scale and self.basis[r] < self.N:
                    self.xB[r] = 0.0
                    continue
                log.info("solve: row %d certifies infeasibility (basic value %.3e)", r, self.xB[r])
                return False
            pi = self._btran(self._basic_costs(1.0, 0.0))
            d = np.maximum(1.0 - np.asarray(self.A.T @ pi).ravel()[candidates], 0.0)
            q = int(candidates[np.argmin(d / np.abs(alpha[candidates]))])
            w = self._ftran(self._column(q))
            self._pivot(r, q, w, self.xB[r] / w[r])
            self.dual_pivots += 1

    # -- results -------------------------------------------------------------------

    def artificial_level(self) -> float:
        return float(np.abs(self.xB[self.basis >= self.N]).sum())

    def min_reduced_cost(self) -> float:
        pi = self._btran(self._basic_costs(1.0, 0.0))
        d = 1.0 - np.asarray(self.A.T @ pi).ravel()
        d[self.is_basic] = 0.0
        return float(d.min()) if d.size else 0.0

    def primal(self) -> np.ndarray:
        x = np.zeros(self.N)
        structural = self.basis < self.N
        x[self.basis[structural]] = self.xB[structural]
        x[(x < 0.0) & (x >= -_NONNEG_TOL)] = 0.0
        return x


def _signed_rows(A, y: np.ndarray):
    """Flip rows with negative right-hand side so the artificial start is feasible"""
    signs = np.where(y < 0, -1.0, 1.0)
    if np.all(signs > 0):
        return A, y
    if sparse.issparse(A):
        return sparse.csc_matrix(sparse.diags(signs) @ A), y * signs
    return A * signs[:, None], y * signs


def solve(problem: LpProblem, opts: Optional[LpOptions] = None) -> LpSolution:
    """Solve min 1^T x, Ax = y, x >= 0 to a basic optimal solution."""
    opts = opts or LpOptions()
    n, N = problem.shape
    max_iters = opts.max_iters or Config.lp_max_iters(n, N)
    A, b = _signed_rows(problem.A, problem.y)

    started = time.perf_counter()
    simplex = _RevisedSimplex(A, b, opts, max_iters)
    feas_limit = opts.feas_tol * simplex.feas_scale
    phase1_iterations = 0

    def finish(status: LpStatus, min_rc: Optional[float] = None) -> LpSolution:
        x = simplex.primal()
        return LpSolution(
            x=x,
            objective=float(x.sum()),
            status=status,
            iterations=simplex.iterations,
            wall_time=time.perf_counter() - started,
            basis=simplex.basis.copy(),
            min_reduced_cost=min_rc,
            phase1_iterations=phase1_iterations,
        )

    try:
        simplex.run_phase(1, cost=0.0, artificial_cost=1.0)
        phase1_iterations = simplex.iterations
        simplex._factor()
        if simplex.artificial_level() > feas_limit:
            log.info("solve: infeasible, phase-1 optimum %.3e", simplex.artificial_level())
            return finish(LpStatus.INFEASIBLE)
        simplex.drive_out_artificials()
        min_rc = -np.inf
        for _ in range(_CLEANUP_ROUNDS):
            simplex.reset_pricing()
            simplex.run_phase(2, cost=1.0, artificial_cost=0.0)
            simplex.restore()
            if not simplex.dual_cleanup():
                return finish(LpStatus.INFEASIBLE)
            min_rc = simplex.min_reduced_cost()
            if min_rc >= -opts.rc_tol:
                break
    except _IterationLimit:
        log.warning("solve: iteration limit %d reached on %dx%d problem", max_iters, n, N)
        return finish(LpStatus.ITERATION_LIMIT)

    solution = finish(LpStatus.OPTIMAL, min_rc)
    residual = float(np.abs(np.asarray(problem.A @ solution.x).ravel() - problem.y).max(initial=0.0))
    lowest = float(solution.x.min(initial=0.0))
    log.debug("solve: %dx%d in %d pivots (%d phase 1, %d dual), %d perturbations",
              n, N, solution.iterations, phase1_iterations, simplex.dual_pivots, simplex.perturbations)
    if residual > feas_limit or lowest < -_NONNEG_TOL or min_rc < -opts.rc_tol:
        log.warning("solve: certificates failed (residual %.3e, min x %.3e, min reduced cost %.3e)",
                    residual, lowest, min_rc)
        return finish(LpStatus.NUMERICAL, min_rc)
    return solution


def recover_l1(Phi, y, opts: Optional[LpOptions] = None, truth=None) -> RecoveryOutcome:
    """Basis pursuit with a non-negativity constraint, wrapped as an outcome.

    Success is judged against `truth` when the caller holds it.
    """
    solution = solve(LpProblem(Phi, y), opts)
    halt = {
        LpStatus.OPTIMAL: "optimal",
        LpStatus.INFEASIBLE: "infeasible",
        LpStatus.ITERATION_LIMIT: "iteration_limit",
        LpStatus.NUMERICAL: "numerical",
    }[solution.status]
    return make_outcome(solution.x, truth, solution.iterations, solution.wall_time, halt)
