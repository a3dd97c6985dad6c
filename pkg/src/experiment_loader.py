"""
Experiment Configuration Loader
Loads experiment descriptions (ensemble, densities, algorithms, sparsity grid)
from JSON templates or explicit paths
"""
import json
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from rich.console import Console

from config import Config
from src.errors import ConfigError
from src.models import (
    Algorithm,
    EnsembleSpec,
    GreedySettings,
    LpOptions,
    SignalDistribution,
    SolverSettings,
    ThresholdOptions,
)

console = Console()


class MatrixMode(str, Enum):
    FRESH = "fresh"
    FIXED = "fixed"


class ExperimentConfig(BaseModel):
    """Complete experiment specification. Unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid")

    experiment_id: str = "experiment"
    description: str = ""
    ensemble: EnsembleSpec
    densities: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    algorithms: List[Algorithm] = Field(default_factory=lambda: [Algorithm.LP], min_length=1)
    k_min: int = Field(default=1, ge=1)
    k_max: Optional[int] = Field(default=None, ge=1)
    k_step: int = Field(default=1, ge=1)
    sparsities: Optional[List[int]] = None
    trials: int = Field(default=100, ge=1)
    t: float = Field(default=Config.DEFAULT_T, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    matrix_mode: MatrixMode = MatrixMode.FRESH
    signal_dist: SignalDistribution = SignalDistribution.UNIFORM01
    output: str = Config.OUTPUT_DIR
    record_timing: bool = True
    # Shape sweep: [[n, N], ...]; None means the ensemble's own shape only.
    dimensions: Optional[List[Tuple[int, int]]] = None
    lp: LpOptions = Field(default_factory=LpOptions)
    cosamp: GreedySettings = Field(default_factory=GreedySettings)
    threshold: ThresholdOptions = Field(default_factory=ThresholdOptions)

    @field_validator("densities")
    @classmethod
    def _check_densities(cls, densities: List[float]) -> List[float]:
        for s in densities:
            if not 0.0 < s <= 1.0:
                raise ValueError(f"densities must lie in (0, 1], got {s}")
        return densities

    @model_validator(mode="after")
    def _check_sparsity_range(self):
        N = self.ensemble.N
        for k in self.sparsity_grid():
            if not 1 <= k <= N:
                raise ValueError(f"sparsity {k} lies outside [1, {N}]")
        if self.k_max is not None and self.k_max < self.k_min:
            raise ValueError(f"k_max={self.k_max} is below k_min={self.k_min}")
        for n, big_n in self.dimensions or []:
            self.ensemble.with_shape(n, big_n)
        return self

    def sparsity_grid(self) -> List[int]:
        """Sparsities swept by run_sweep"""
        if self.sparsities:
            return list(self.sparsities)
        k_max = self.k_max if self.k_max is not None else min(self.ensemble.n, self.ensemble.N)
        return list(range(self.k_min, k_max + 1, self.k_step))

    def shapes(self) -> List[EnsembleSpec]:
        """Ensemble at every configured shape"""
        if not self.dimensions:
            return [self.ensemble]
        return [self.ensemble.with_shape(n, big_n) for n, big_n in self.dimensions]

    @property
    def solver_settings(self) -> SolverSettings:
        return SolverSettings(lp=self.lp, cosamp=self.cosamp)

    @property
    def run_dir(self) -> Path:
        return Path(self.output) / self.experiment_id


class ExperimentLoader:
    """Loads and validates an experiment configuration"""

    def __init__(self, source: str, templates_dir: Optional[str] = None):
        self.source = source
        self.templates_dir = Path(templates_dir or Config.EXPERIMENT_TEMPLATES_DIR)
        self._custom_dir = templates_dir is not None
        self.path = self._resolve()
        self.config: Optional[ExperimentConfig] = None
        self._load_config()

    def _resolve(self) -> Path:
        """A path to a JSON file, or the name of a shipped template"""
        candidate = Path(self.source)
        if candidate.is_file():
            return candidate
        if self._custom_dir:
            template = self.templates_dir / f"{self.source}.json"
        else:
            template = Config.get_template_path(self.source)
        if template.is_file():
            return template
        available = sorted(p.stem for p in self.templates_dir.glob("*.json")) if self.templates_dir.is_dir() else []
        raise ConfigError(f"Experiment config not found: {self.source}. Templates: {available}")

    def _load_config(self):
        """Load config from JSON file"""
        try:
            with open(self.path, 'r') as f:
                data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{self.path}: invalid JSON ({exc})") from exc
        except OSError as exc:
            raise ConfigError(f"{self.path}: cannot read ({exc})") from exc

        try:
            self.config = ExperimentConfig.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"{self.path}: {exc}") from exc

    def with_overrides(self, seed: Optional[int] = None, output: Optional[str] = None) -> ExperimentConfig:
        """Config with CLI overrides (--seed, --out) applied and re-validated"""
        data = self.config.model_dump()
        if seed is not None:
            data["seed"] = seed
        if output is not None:
            data["output"] = output
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"{self.path}: {exc}") from exc

    def print_summary(self):
        """Print summary of loaded experiment"""
        cfg = self.config
        grid = cfg.sparsity_grid()
        console.print("\n" + "="*70)
        console.print(f"[bold cyan]{cfg.experiment_id}[/bold cyan]  [dim]{self.path}[/dim]")
        console.print("="*70)
        if cfg.description:
            console.print(f"[yellow]{cfg.description}[/yellow]")
        console.print(f"\nEnsemble: {cfg.ensemble.label} {cfg.ensemble.n}x{cfg.ensemble.N}")
        if cfg.dimensions:
            console.print(f"Shapes: {', '.join(f'{n}x{N}' for n, N in cfg.dimensions)}")
        console.print(f"Densities: {', '.join(f'{s:g}' for s in cfg.densities)}")
        console.print(f"Algorithms: {', '.join(a.value for a in cfg.algorithms)}")
        console.print(f"Sparsities: {grid[0]}..{grid[-1]} ({len(grid)} values), {cfg.trials} trials each")
        console.print(f"Matrix mode: {cfg.matrix_mode.value} | Signals: {cfg.signal_dist.value} | Seed: {cfg.seed}")
        console.print("="*70 + "\n")


def load_experiment_config(source: str, templates_dir: Optional[str] = None) -> ExperimentConfig:
    """
    Convenience function to load an experiment configuration

    Args:
        source: Path to a JSON file or a template name ('uniform_recovery_curve', 'timing_table', ...)
        templates_dir: Path to experiment templates directory

    Returns:
        Validated ExperimentConfig
    """
    return ExperimentLoader(source, templates_dir).config
