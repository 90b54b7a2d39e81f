"""Named random sub-streams derived from one run seed.

Each pipeline stage draws from its own PCG64 generator keyed by
``(seed, stage name)``, so changing how much one stage consumes never shifts
the numbers another stage sees.
"""
import zlib

import numpy as np

STREAMS = ("split", "init", "dropout", "batch", "fixture")


def stream(seed: int, name: str) -> np.random.Generator:
    if name not in STREAMS:
        raise ValueError(f"unknown random stream {name!r}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    key = zlib.crc32(name.encode())
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, key])))
