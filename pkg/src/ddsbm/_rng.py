"""Seeded random streams.

Every stream is a Philox counter-based generator keyed by a 64-bit seed.
Child seeds come from the splitmix64 finalizer so replicate streams can be
derived in any order.
"""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(master: int, index: int) -> int:
    """64-bit seed for child stream ``index`` of ``master``."""
    return splitmix64((int(master) & _MASK) ^ splitmix64(int(index) & _MASK))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK))
