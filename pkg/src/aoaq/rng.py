"""Seed mixing for reproducible substreams.

Every substream (one Monte Carlo block, one simulated flight) is seeded with
``derive_seed(base_seed, index)``.  The mixer is two rounds of SplitMix64::

    derive_seed(s, i) = splitmix64(splitmix64(s mod 2**64) XOR (i mod 2**64))

so the stream for index ``i`` never depends on how many workers ran or in
which order they finished.
"""
import random

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    return splitmix64(splitmix64(base_seed & MASK64) ^ (index & MASK64))


def py_stream(base_seed: int, index: int) -> random.Random:
    """Scalar stream (``random.Random``) for substream ``index``."""
    return random.Random(derive_seed(base_seed, index))


def np_stream(base_seed: int, index: int) -> np.random.Generator:
    """Vectorised stream (PCG64) for substream ``index``."""
    return np.random.Generator(np.random.PCG64(derive_seed(base_seed, index)))
