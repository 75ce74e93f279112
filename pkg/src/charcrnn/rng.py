"""Named, reproducible random streams.

Every stochastic component (parameter init, shuffling, benchmarks) draws
from its own generator derived from a single run seed plus a stream name,
so adding a new consumer never perturbs the draws of existing ones.
"""

import zlib

import numpy as np


def named_rng(seed: int, name: str) -> np.random.Generator:
    """Return a Generator for the stream `name` under the run seed."""
    if not isinstance(seed, int):
        raise TypeError(f"seed must be an int, got {type(seed).__name__}")
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, tag]))
