"""Portable counter-based random numbers.

Every draw is ``splitmix64(key + (counter + 1) * 0x9E3779B97F4A7C15)`` in
uint64 arithmetic, where ``key`` folds the seed and any stream labels through
the same mixer. Uniform reals take the top 53 bits; normals use Box–Muller
over two uniforms. The sequence depends only on (seed, streams, counter), so a
dataset sample is fully determined by (seed, index) on any platform.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z ^ (z >> np.uint64(30))
        z = z * np.uint64(_MIX1)
        z = z ^ (z >> np.uint64(27))
        z = z * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def _stream_word(stream: int | str) -> int:
    if isinstance(stream, str):
        return int.from_bytes(
            hashlib.blake2b(stream.encode(), digest_size=8).digest(), "little"
        )
    return int(stream) & _MASK


def derive_key(seed: int, *streams: int | str) -> int:
    """Fold a seed and stream labels into one 64-bit key."""
    key = mix64(int(seed) & _MASK)
    for stream in streams:
        key = mix64(key ^ mix64(_stream_word(stream) + _GOLDEN))
    return key


def derive_seed(seed: int, *streams: int | str) -> int:
    """Non-negative 63-bit seed derived from a parent seed."""
    return derive_key(seed, *streams) >> 1


class CounterRNG:
    """Counter-based generator keyed by (seed, *streams)."""

    def __init__(self, seed: int, *streams: int | str):
        self.key = derive_key(seed, *streams)
        self.counter = 0

    def child(self, *streams: int | str) -> CounterRNG:
        rng = CounterRNG(0)
        rng.key = derive_key(self.key, *streams)
        return rng

    def bits(self, n: int) -> np.ndarray:
        counters = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.key) + counters * np.uint64(_GOLDEN)
        return _mix64_array(z)

    def random(self, size: int | tuple[int, ...] | None = None) -> np.ndarray | float:
        """Uniform reals in [0, 1)."""
        n = 1 if size is None else int(np.prod(size))
        values = (self.bits(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return float(values[0]) if size is None else values.reshape(size)

    def uniform(
        self,
        lo: float = 0.0,
        hi: float = 1.0,
        size: int | tuple[int, ...] | None = None,
    ) -> np.ndarray | float:
        return lo + (hi - lo) * self.random(size)

    def normal(self, size: int | tuple[int, ...]) -> np.ndarray:
        n = int(np.prod(size))
        u = self.random(2 * n)
        radius = np.sqrt(-2.0 * np.log(1.0 - u[:n]))
        return (radius * np.cos(2.0 * np.pi * u[n:])).reshape(size)

    def integers(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi)."""
        return lo + min(int(self.random() * (hi - lo)), hi - lo - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher–Yates shuffle of range(n)."""
        order = np.arange(n)
        draws = self.random(n) if n else np.empty(0)
        for i in range(n - 1, 0, -1):
            j = min(int(draws[i] * (i + 1)), i)
            order[i], order[j] = order[j], order[i]
        return order
