"""Deterministic 64-bit SplitMix generator.

All randomness in this package (weight init, pixel sampling, episode
construction, synthetic data) flows through this generator so that a given
seed reproduces bit-identical artifacts. The update is the SplitMix64
finalizer of Steele, Lea & Flood:

    state   += 0x9E3779B97F4A7C15                     (golden-ratio increment)
    z        = state
    z        = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z        = (z ^ (z >> 27)) * 0x94D049BB133111EB
    output   = z ^ (z >> 31)

all arithmetic mod 2^64. Doubles in [0, 1) take the top 53 bits:
``(output >> 11) * 2**-53``. Bounded integers use ``output % n`` (the modulo
bias is below 2^-50 for every n used here). These rules are normative for
anything that must replay a recorded seed.
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Seeded deterministic stream of 64-bit words, floats, and draws."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_float()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        return self.next_u64() % n

    def choice(self, items):
        return items[self.randint(len(items))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, descending index."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, k: int) -> np.ndarray:
        """k distinct integers from [0, n) without replacement.

        Partial Fisher-Yates: the first k slots of a seeded shuffle, so
        k = n yields a full permutation.
        """
        if k > n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        pool = np.arange(n, dtype=np.int64)
        for i in range(k):
            j = i + self.randint(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k].copy()

    def uniform_array(self, lo: float, hi: float, count: int) -> np.ndarray:
        return np.array([self.uniform(lo, hi) for _ in range(count)], dtype=np.float64)

    def spawn(self) -> "SplitMix64":
        """Child generator keyed off this stream (for per-component seeding)."""
        return SplitMix64(self.next_u64())
