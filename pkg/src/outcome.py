from dataclasses import dataclass
from typing import Optional

import numpy as np

from config import Config
from src.siggen import l1_distance


@dataclass(frozen=True)
class RecoveryOutcome:
    """Result of one recovery attempt.

    `success` is derived from `l1_error`, so the two can never disagree. An
    outcome built without the true signal has no error and is never a success.
    """
    xhat: np.ndarray
    l1_error: Optional[float]
    iterations: int
    wall_time: float
    halt_reason: str
    rank_deficient: bool = False
    error: Optional[str] = None

    @property
    def success(self) -> bool:
        return self.l1_error is not None and self.l1_error <= Config.SUCCESS_TOL


def make_outcome(xhat, truth, iterations: int, wall_time: float, halt_reason: str,
                 rank_deficient: bool = False, error: Optional[str] = None) -> RecoveryOutcome:
    l1_error = None if truth is None else l1_distance(truth, xhat)
    return RecoveryOutcome(
        xhat=xhat,
        l1_error=l1_error,
        iterations=iterations,
        wall_time=wall_time,
        halt_reason=halt_reason,
        rank_deficient=rank_deficient,
        error=error,
    )


def failed_outcome(N: int, truth, tag: str, wall_time: float = 0.0) -> RecoveryOutcome:
    """Outcome for a trial whose algorithm raised; recorded, never dropped.

    The estimate is the zero vector, so l1_error is |truth|_1.
    """
    xhat = np.zeros(N)
    return RecoveryOutcome(
        xhat=xhat,
        l1_error=None if truth is None else l1_distance(truth, xhat),
        iterations=0,
        wall_time=wall_time,
        halt_reason=f"error:{tag}",
        error=tag,
    )
