"""Seed-stable pseudo-random streams.

The generator is xoshiro256** seeded through splitmix64, implemented with
plain 64-bit integer arithmetic so the same seed yields the same draw
sequence on every platform. Independent substreams are derived from
(seed, tag) pairs: consuming draws from one stream never shifts another,
which keeps e.g. data generation independent of augmentation order.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 2.0 ** -53


def _splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


class Rng:
    """xoshiro256** stream with named substream splitting.

    The 256-bit state is filled from four successive splitmix64 outputs of
    the seed. ``stream(tag)`` derives a child whose seed is
    ``splitmix64(seed ^ fnv1a64(tag))``, so substreams are a pure function
    of (seed, tag). A generator instance is single-owner: never share one
    across threads.
    """

    __slots__ = ("seed", "_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        sm = self.seed
        words = []
        for _ in range(4):
            sm = (sm + _GOLDEN) & _MASK64
            z = sm
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            words.append(z ^ (z >> 31))
        if not any(words):  # the all-zero state is a fixed point
            words[0] = 1
        self._s0, self._s1, self._s2, self._s3 = words

    def stream(self, tag: str) -> "Rng":
        """Child generator for an independent, named purpose."""
        return Rng(_splitmix64(self.seed ^ _fnv1a64(tag)))

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        x = (s1 * 5) & _MASK64
        result = (((x << 7) | (x >> 57)) & _MASK64) * 9 & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def _u64_block(self, n: int) -> np.ndarray:
        out = [0] * n
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        for i in range(n):
            x = (s1 * 5) & _MASK64
            out[i] = (((x << 7) | (x >> 57)) & _MASK64) * 9 & _MASK64
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return np.array(out, dtype=np.uint64)

    # -- scalar draws ------------------------------------------------------

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform draw in [lo, hi). One u64 consumed."""
        u = (self.next_u64() >> 11) * _INV_2_53
        return lo + (hi - lo) * u

    def randint(self, n: int) -> int:
        """Integer in [0, n) via multiply-shift. One u64 consumed."""
        if n <= 0:
            raise ValueError(f"randint needs n >= 1, got {n}")
        return (self.next_u64() * n) >> 64

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        """Gaussian draw via Box-Muller; two u64 consumed, no spare kept."""
        u1 = ((self.next_u64() >> 11) + 1) * _INV_2_53  # (0, 1]
        u2 = (self.next_u64() >> 11) * _INV_2_53
        return mean + std * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    # -- bulk draws --------------------------------------------------------

    def uniform_array(self, shape, lo: float = 0.0, hi: float = 1.0,
                      dtype=np.float64) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        u = (self._u64_block(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        out = lo + (hi - lo) * u
        return out.reshape(shape).astype(dtype, copy=False)

    def normal_array(self, shape, mean: float = 0.0, std: float = 1.0,
                     dtype=np.float64) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        a = self._u64_block(n)
        b = self._u64_block(n)
        u1 = ((a >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (b >> np.uint64(11)).astype(np.float64) * _INV_2_53
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        out = mean + std * z
        return out.reshape(shape).astype(dtype, copy=False)
