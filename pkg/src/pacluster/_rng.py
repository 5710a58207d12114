"""Named random streams derived from one integer seed.

Each consumer asks for its own stream by name, so adding a new consumer
never shifts the draws another one sees.
"""

import zlib

import numpy as np


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=key))
