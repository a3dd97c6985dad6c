"""
Configuration file for the Sparse Sense experimentation toolkit
"""
import os
from pathlib import Path


class Config:
    """Application configuration"""

    # ============================================================================
    # RECOVERY CRITERION
    # ============================================================================
    # A recovery counts as successful when |x - x_hat|_1 <= SUCCESS_TOL.
    SUCCESS_TOL = 1e-6

    # ============================================================================
    # LINEAR PROGRAMMING (revised simplex)
    # ============================================================================
    # Relative feasibility tolerance: |Ax - y|_inf <= LP_FEAS_TOL * max(1, |y|_inf)
    LP_FEAS_TOL = 1e-8
    LP_RC_TOL = 1e-9
    LP_PIVOT_TOL = 1e-10
    LP_PRICING_WINDOW = 200
    LP_REFACTOR_EVERY = 100
    LP_BLAND_AFTER = 50
    # Near-zero basics are lifted by LP_PERTURBATION * max(1, |y|_inf) * U(1, 2)
    # when a pivot stalls; the lift is removed before the solution is reported.
    LP_PERTURBATION = 1e-7
    LP_PERTURB_SEED = 0
    # Iteration limit is LP_MAX_ITERS_FACTOR * (n + N) unless a config sets it.
    LP_MAX_ITERS_FACTOR = 50

    # ============================================================================
    # GREEDY ALGORITHMS (OMP / CoSaMP)
    # ============================================================================
    GREEDY_MAX_ITERS = 100
    # Relative to |y|_2
    GREEDY_RESIDUAL_TOL = 1e-7
    COSAMP_STAGNATION_TOL = 1e-7
    COSAMP_STAGNATION_PATIENCE = 3

    # ============================================================================
    # SPARSIFICATION
    # ============================================================================
    # Fresh mask draws allowed for a column that masks to all zeros.
    MASK_RESAMPLE_LIMIT = 100

    # ============================================================================
    # NUMERIC DIAGNOSTICS
    # ============================================================================
    # rip_epsilon refuses to enumerate more supports than this.
    RIP_ENUMERATION_LIMIT = 1_000_000

    # ============================================================================
    # THRESHOLD ESTIMATION
    # ============================================================================
    # Trials per stage of the adaptive scan and the restart back-off.
    THRESHOLD_STAGE_TRIALS = (50, 200, 1000)
    THRESHOLD_BACKOFF = 3
    DEFAULT_T = 0.98

    # ============================================================================
    # HARNESS
    # ============================================================================
    EXPERIMENT_TEMPLATES_DIR = str(Path(__file__).resolve().parent / 'experiment_templates')
    OUTPUT_DIR = os.environ.get('SPARSE_SENSE_OUTPUT_DIR', 'outputs')
    LOG_LEVEL = os.environ.get('SPARSE_SENSE_LOG_LEVEL', 'INFO').upper()
    CSV_SCHEMA_VERSION = 1

    # Worker pool size for trial execution. 1 runs everything in-process.
    WORKERS = 1

    @classmethod
    def get_workers(cls) -> int:
        """Default worker count, honouring SPARSE_SENSE_WORKERS"""
        raw = os.environ.get('SPARSE_SENSE_WORKERS', '').strip()
        if not raw:
            return cls.WORKERS
        try:
            workers = int(raw)
        except ValueError:
            return cls.WORKERS
        return max(1, workers)

    @classmethod
    def get_template_path(cls, name: str) -> Path:
        """Get path to a named experiment template"""
        return Path(cls.EXPERIMENT_TEMPLATES_DIR) / f"{name}.json"

    @classmethod
    def list_available_templates(cls) -> list:
        """List all shipped experiment templates"""
        templates_dir = Path(cls.EXPERIMENT_TEMPLATES_DIR)
        if not templates_dir.is_dir():
            return []
        return sorted(p.stem for p in templates_dir.glob('*.json'))

    @classmethod
    def lp_max_iters(cls, n: int, N: int) -> int:
        """Default simplex iteration bound for an n x N problem"""
        return cls.LP_MAX_ITERS_FACTOR * (n + N)


# ============================================================================
# ENVIRONMENT-SPECIFIC OVERRIDES
# ============================================================================
# These can be set via environment variables

# Override template directory
# Example: export SPARSE_SENSE_TEMPLATES=/path/to/templates
if 'SPARSE_SENSE_TEMPLATES' in os.environ:
    Config.EXPERIMENT_TEMPLATES_DIR = os.environ['SPARSE_SENSE_TEMPLATES']
