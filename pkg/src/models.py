from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import Config


class EnsembleKind(str, Enum):
    """Random matrix constructions"""
    ABS_NORMAL = "AbsNormal"
    UNIFORM01 = "Uniform01"
    BERNOULLI = "Bernoulli"
    PARTIAL_CIRCULANT = "PartialCirculant"
    ALL_ONES = "AllOnes"
    IDENTITY = "Identity"


class SignalDistribution(str, Enum):
    """Distribution of the non-zero entries of test signals"""
    UNIFORM01 = "Uniform01"
    ABS_NORMAL = "AbsNormal"


class Algorithm(str, Enum):
    LP = "lp"
    OMP = "omp"
    COSAMP = "cosamp"


class EnsembleSpec(BaseModel):
    """Matrix ensemble and shape. Serializes with keys kind, p, n, N."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: EnsembleKind
    n: int = Field(ge=1)
    N: int = Field(ge=1)
    p: Optional[float] = Field(default=None, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_kind_parameters(self):
        if self.kind == EnsembleKind.BERNOULLI and self.p is None:
            raise ValueError("Bernoulli ensemble requires p in [0, 1]")
        if self.kind == EnsembleKind.PARTIAL_CIRCULANT and self.n > self.N:
            raise ValueError(f"cannot sample {self.n} distinct rows from a {self.N}x{self.N} circulant")
        if self.kind == EnsembleKind.IDENTITY and self.n != self.N:
            raise ValueError(f"identity ensemble must be square, got {self.n}x{self.N}")
        return self

    def with_shape(self, n: int, N: int) -> "EnsembleSpec":
        """Same construction at another shape"""
        return EnsembleSpec(kind=self.kind, n=n, N=N, p=self.p)

    @property
    def label(self) -> str:
        if self.kind == EnsembleKind.BERNOULLI:
            return f"Bernoulli({self.p:g})"
        return self.kind.value


class SignalSpec(BaseModel):
    """k-sparse test signal in dimension N"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    N: int = Field(ge=1)
    k: int = Field(ge=1)
    dist: SignalDistribution = SignalDistribution.UNIFORM01

    @model_validator(mode="after")
    def _check_sparsity(self):
        if self.k > self.N:
            raise ValueError(f"sparsity k={self.k} exceeds dimension N={self.N}")
        return self


class LpOptions(BaseModel):
    """Simplex tolerances and limits (config keys lp.*)"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    max_iters: Optional[int] = Field(default=None, ge=1)  # None -> 50 * (n + N)
    feas_tol: float = Field(default=Config.LP_FEAS_TOL, gt=0)
    rc_tol: float = Field(default=Config.LP_RC_TOL, gt=0)
    pivot_tol: float = Field(default=Config.LP_PIVOT_TOL, gt=0)
    pricing_window: int = Field(default=Config.LP_PRICING_WINDOW, ge=1)
    refactor_every: int = Field(default=Config.LP_REFACTOR_EVERY, ge=1)
    bland_after: int = Field(default=Config.LP_BLAND_AFTER, ge=1)
    perturbation: float = Field(default=Config.LP_PERTURBATION, ge=0)


class GreedyOpts(BaseModel):
    """Options for OMP and CoSaMP. The sparsity k is always supplied."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    k: int = Field(ge=1)
    max_iters: int = Field(default=Config.GREEDY_MAX_ITERS, ge=1)
    residual_tol: float = Field(default=Config.GREEDY_RESIDUAL_TOL, ge=0)  # relative to |y|_2
    stagnation_tol: float = Field(default=Config.COSAMP_STAGNATION_TOL, ge=0)
    stagnation_patience: int = Field(default=Config.COSAMP_STAGNATION_PATIENCE, ge=1)


class GreedySettings(BaseModel):
    """Config block cosamp.*; k is filled in per trial"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    max_iters: int = Field(default=Config.GREEDY_MAX_ITERS, ge=1)
    residual_tol: float = Field(default=Config.GREEDY_RESIDUAL_TOL, ge=0)

    def for_sparsity(self, k: int) -> GreedyOpts:
        return GreedyOpts(k=k, max_iters=self.max_iters, residual_tol=self.residual_tol)


class SolverSettings(BaseModel):
    """Everything run_trial needs besides the matrix and the signal"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    lp: LpOptions = Field(default_factory=LpOptions)
    cosamp: GreedySettings = Field(default_factory=GreedySettings)


class ThresholdOptions(BaseModel):
    """Config block threshold.*"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    ceiling: Optional[int] = Field(default=None, ge=1)  # None -> n
    stage_trials: List[int] = Field(default_factory=lambda: list(Config.THRESHOLD_STAGE_TRIALS), min_length=1)
    backoff: int = Field(default=Config.THRESHOLD_BACKOFF, ge=0)
    fast: bool = False


class TraceEntry(BaseModel):
    """One sparsity visited by the threshold scan"""
    k: int
    stage: int  # trials per k in this stage (50, 200, 1000)
    trials: int
    successes: int


class ThresholdEstimate(BaseModel):
    """Estimated t-recovery threshold and the scan that produced it"""
    t: float
    r_hat: int
    k0: int
    k1: int
    k2: int
    trace: List[TraceEntry] = Field(default_factory=list)
    mode: str = "staged"

    @property
    def consistent(self) -> bool:
        """True when the last two stages stopped at the same sparsity"""
        return self.k1 == self.k2

    @property
    def total_trials(self) -> int:
        return sum(e.trials for e in self.trace)


class TrialRecord(BaseModel):
    """One attempted recovery, as written to the trial CSV"""
    experiment_id: str
    ensemble: str
    n: int
    N: int
    density: float
    algorithm: Algorithm
    k: int
    trial: int
    seed: int
    success: int
    l1_error: float
    wall_time_s: Optional[float] = None
    iterations: int
    halt_reason: str


class CellMetrics(BaseModel):
    """Aggregate of every trial in one (density, algorithm, k) cell"""
    ensemble: str
    n: int
    N: int
    density: float
    algorithm: Algorithm
    k: int
    trials: int = 0
    successes: int = 0
    errors: int = 0
    total_wall_time_s: float = 0.0
    timed: bool = True

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    @property
    def mean_wall_time_s(self) -> Optional[float]:
        if not self.timed or not self.trials:
            return None
        return self.total_wall_time_s / self.trials
