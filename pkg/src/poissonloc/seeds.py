"""Deterministic seed derivation for independent substreams.

Every stochastic component draws from its own numpy Generator whose seed is
derived from the master seed and one or more integer indices by folding each
index through splitmix64:

    state = mix64(state XOR (index + 1))

The +1 keeps index 0 from being a no-op XOR. The scheme is pure integer
arithmetic, so derived seeds (and therefore all simulated data) are identical
across platforms and across any worker partitioning of the same index space.
"""
from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def mix64(x: int) -> int:
    """splitmix64 finalizer; bijective on 64-bit integers."""
    x &= _MASK
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_seed(master: int, *indices: int) -> int:
    """Fold integer indices into a master seed, one mix64 round per index."""
    state = mix64(int(master) & _MASK)
    for idx in indices:
        state = mix64(state ^ ((int(idx) + 1) & _MASK))
    return state


def substream(master: int, *indices: int) -> np.random.Generator:
    """Generator for the substream addressed by `indices` under `master`."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *indices)))
