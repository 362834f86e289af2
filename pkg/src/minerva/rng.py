"""Deterministic counter-based random number generation.

The generator is SplitMix64 (Steele, Lea & Flood's mixing function as
popularized by Vigna's reference implementation): output ``i`` of a stream
with seed ``s`` is ``mix64(s + (i + 1) * GAMMA) mod 2^64``. Because each
output is a pure function of (seed, counter), blocks of draws can be
produced vectorized with numpy uint64 arithmetic and the stream is
reproducible in any language with 64-bit integers.

Reference vectors (seed 0): e220a8397b1dcdaf, 6e789e6aa1b965f4,
06c45d188009454f, ... (see tests/test_rng.py).

Streams are split by name: ``derive(label)`` reseeds a child with
``mix64(seed XOR fnv1a64(label))`` so subsystems never share draws.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_DOUBLE_UNIT = 2.0 ** -53

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """SplitMix64 finalizer: bijective avalanche mix on 64 bits."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def fnv1a64(label: str) -> int:
    """FNV-1a hash of a stream label, used only for stream splitting."""
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    # numpy uint64 ops wrap mod 2^64, matching the scalar path bit for bit
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class Rng:
    """One SplitMix64 stream: a seed plus a draw counter."""

    def __init__(self, seed: int, counter: int = 0):
        self.seed = seed & _MASK64
        self.counter = counter

    def derive(self, label: str) -> "Rng":
        """Child stream for an independent purpose; counter starts at 0."""
        return Rng(mix64(self.seed ^ fnv1a64(label)))

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.seed + self.counter * _GAMMA)

    def u64_array(self, k: int) -> np.ndarray:
        """Next k raw outputs as uint64, advancing the counter by k."""
        idx = np.arange(self.counter + 1, self.counter + k + 1, dtype=np.uint64)
        self.counter += k
        with np.errstate(over="ignore"):
            return _mix64_vec(np.uint64(self.seed) + idx * np.uint64(_GAMMA))

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _DOUBLE_UNIT

    def random_array(self, k: int) -> np.ndarray:
        return (self.u64_array(k) >> np.uint64(11)).astype(np.float64) * _DOUBLE_UNIT

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n), exact via rejection sampling."""
        if n <= 0:
            raise ValueError(f"randbelow bound must be positive, got {n}")
        limit = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            z = self.next_u64()
            if z < limit:
                return z % n

    def integers_array(self, n: int, k: int) -> np.ndarray:
        """k uniform integers in [0, n) as int64, exact via rejection."""
        if n <= 0:
            raise ValueError(f"integers bound must be positive, got {n}")
        limit = _MASK64 + 1 - ((_MASK64 + 1) % n)
        out = self.u64_array(k)
        bad = out >= limit
        while bad.any():  # P(reject) < n / 2^64; effectively never loops
            out[bad] = self.u64_array(int(bad.sum()))
            bad = out >= limit
        return (out % np.uint64(n)).astype(np.int64)

    def normal(self) -> float:
        """Standard normal via Box-Muller; consumes two draws."""
        u1 = ((self.next_u64() >> 11) + 1) * _DOUBLE_UNIT  # (0, 1]
        u2 = (self.next_u64() >> 11) * _DOUBLE_UNIT
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normal_array(self, k: int) -> np.ndarray:
        u1 = ((self.u64_array(k) >> np.uint64(11)).astype(np.float64) + 1.0) * _DOUBLE_UNIT
        u2 = (self.u64_array(k) >> np.uint64(11)).astype(np.float64) * _DOUBLE_UNIT
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def permutation(self, n: int) -> np.ndarray:
        """Uniform permutation of {0..n-1} by Fisher-Yates."""
        perm = np.arange(n, dtype=np.int64)
        if n < 2:
            return perm
        # pre-draw one u64 per position; rejection redraws are scalar
        draws = self.u64_array(n - 1)
        span = _MASK64 + 1
        for i in range(n - 1, 0, -1):
            bound = i + 1
            limit = span - (span % bound)
            z = int(draws[n - 1 - i])
            while z >= limit:
                z = self.next_u64()
            j = z % bound
            perm[i], perm[j] = perm[j], perm[i]
        return perm
