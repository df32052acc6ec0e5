"""Named, seedable, splittable random streams.

Every consumer asks for ``stream(seed, name, *indices)``; distinct names or
indices give statistically independent PCG64 generators, and the same
arguments always give the same generator.
"""
import zlib

import numpy as np


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def stream(seed: int, *path) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_key(p) for p in path]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def split(rng: np.random.Generator, count: int):
    """Spawn ``count`` independent child generators from ``rng``."""
    return [np.random.Generator(bg) for bg in rng.bit_generator.spawn(count)]
