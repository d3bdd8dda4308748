"""Deterministic counter-based random numbers (splitmix64).

Each output word is ``mix64(seed + (counter + i) * GAMMA)``, the
splitmix64 finalizer over a strided counter, so draws depend only on
(seed, counter) and vectorize over numpy uint64 arrays. State is the
(seed, counter) pair, which makes snapshots and resumes exact. The
integer pipeline is bit-identical everywhere; normal variates apply
Box-Muller on top, whose log/cos steps follow the platform libm.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def _mix64(v):
    v = (v ^ (v >> _U64(30))) * _MIX1
    v = (v ^ (v >> _U64(27))) * _MIX2
    return v ^ (v >> _U64(31))


class Rng:
    """Stateful deterministic generator over the splitmix64 stream."""

    def __init__(self, seed, counter=0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.counter = int(counter)

    def state(self):
        return (self.seed, self.counter)

    def set_state(self, state):
        self.seed = int(state[0]) & 0xFFFFFFFFFFFFFFFF
        self.counter = int(state[1])

    def _words(self, n):
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix64(_U64(self.seed) + idx * _GAMMA)

    def uniform(self, shape=(), lo=0.0, hi=1.0):
        """Uniform floats in [lo, hi) with 53-bit resolution."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u = (self._words(n) >> _U64(11)).astype(np.float64) * 2.0**-53
        out = lo + u * (hi - lo)
        return out.reshape(shape) if shape else float(out[0])

    def randn(self, shape=()):
        """Standard normal variates via Box-Muller (cosine branch)."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        # u1 in (0, 1] so the log is finite.
        u1 = ((self._words(n) >> _U64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (self._words(n) >> _U64(11)).astype(np.float64) * 2.0**-53
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return z.reshape(shape) if shape else float(z[0])

    def randint(self, n):
        """Single integer uniform on [0, n)."""
        if n <= 0:
            raise ValueError(f"randint bound must be positive, got {n}")
        return min(int(self.uniform() * n), n - 1)

    def spawn(self, stream):
        """Independent child stream keyed off this seed."""
        with np.errstate(over="ignore"):
            child = _mix64(_U64(self.seed) ^ _mix64(_U64(int(stream) + 0x5851F42D)))
        return Rng(int(child))


def rng_uniform(shape, seed, lo=0.0, hi=1.0):
    """Stateless convenience: fresh stream from ``seed``."""
    return Rng(seed).uniform(shape, lo, hi)


def rng_randn(shape, seed):
    """Stateless convenience: fresh stream from ``seed``."""
    return Rng(seed).randn(shape)
