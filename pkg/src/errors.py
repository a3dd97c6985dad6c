"""
Exception hierarchy for the toolkit.

Every error raised on purpose derives from SparseSenseError so the CLI can
separate configuration problems (exit 1) from runtime failures (exit 2).
"""
from typing import Optional


class SparseSenseError(Exception):
    """Base class for all toolkit errors"""


class ParameterError(SparseSenseError, ValueError):
    """An argument lies outside the operation's domain."""


class DimensionMismatchError(ParameterError):
    """Operand shapes are incompatible."""


class EnumerationGuardError(ParameterError):
    """Brute-force enumeration would exceed the configured limit."""

    def __init__(self, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(
            f"refusing to enumerate {count:,} supports (limit {limit:,}); "
            "use a smaller matrix or sparsity"
        )


class DegenerateColumnError(SparseSenseError, ArithmeticError):
    """A masked column is identically zero and cannot be normalized."""

    def __init__(self, column: int, attempts: int = 0):
        self.column = column
        self.attempts = attempts
        super().__init__(
            f"column {column} is all zeros after masking "
            f"({attempts} resample attempts)"
        )


class UndefinedRatioError(SparseSenseError, ZeroDivisionError):
    """Relative density of a matrix with no non-zero entries."""


class SolverError(SparseSenseError, RuntimeError):
    """The simplex solver hit a numerical breakdown."""


class CeilingReachedError(SparseSenseError):
    """The threshold scan succeeded at every sparsity up to the ceiling.

    The true threshold is at least `ceiling`; `trace` holds the scan so far.
    """

    def __init__(self, ceiling: int, trace: Optional[list] = None):
        self.ceiling = ceiling
        self.trace = list(trace or [])
        super().__init__(f"recovery never failed up to k={ceiling}; r_hat >= {ceiling}")


class ConfigError(SparseSenseError):
    """An experiment configuration could not be loaded or validated."""


class ReportInputError(SparseSenseError, FileNotFoundError):
    """Inputs required by a report recipe are missing."""
