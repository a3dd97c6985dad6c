"""
Seeded randomness with independent, addressable streams.

A Seed is a master value plus a path of integers. `derive` extends the path
with a purpose code and indices, and `rng` hashes (master, path) through
numpy's SeedSequence, so the matrix, mask and signal streams of a trial are
independent yet reproducible from (master, trial index) alone.
"""
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

# Fixed codes: str hashes are salted per process and cannot be used here.
STREAM_TAGS = {
    "matrix": 1,
    "mask": 2,
    "signal": 3,
    "trial": 4,
    "resample": 5,
    "threshold": 6,
}


class Seed(BaseModel):
    """A reproducible position in the seed tree"""
    model_config = ConfigDict(frozen=True)

    master: int = Field(ge=0, lt=2**64)
    path: Tuple[int, ...] = ()

    def derive(self, purpose: str, *index: int) -> "Seed":
        """Child seed for a named stream and optional indices"""
        try:
            tag = STREAM_TAGS[purpose]
        except KeyError:
            raise ValueError(f"Unknown stream purpose: {purpose}. Supported: {list(STREAM_TAGS)}") from None
        return Seed(master=self.master, path=self.path + (tag,) + tuple(int(i) for i in index))

    def rng(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream"""
        return np.random.default_rng(np.random.SeedSequence(self.master, spawn_key=self.path))


def as_seed(value) -> Seed:
    """Accept a Seed or a bare master integer"""
    if isinstance(value, Seed):
        return value
    return Seed(master=int(value))
