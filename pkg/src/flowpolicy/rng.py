"""Seeded, splittable random streams.

Streams are backed by the counter-based Philox engine, so a stream is a
pure function of its 64-bit key: no global state, and child streams are
derived by hashing (key, child index) with SplitMix64.  Gaussians use an
explicit Box-Muller transform over the uniform stream so the draw
sequence is fixed by this module, not by library internals.
"""

from __future__ import annotations

import numpy as np

from .nn.tensor import Tensor

__all__ = ["RngStream", "gaussian"]

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return (z ^ (z >> 31)) & _M64


class RngStream:
    """One independently seeded random stream."""

    def __init__(self, seed: int, _key: int | None = None):
        self.seed = int(seed) & _M64
        self._key = self.seed if _key is None else _key
        self._gen = np.random.Generator(np.random.Philox(key=self._key))
        self.draws = 0

    def child(self, index: int) -> "RngStream":
        """Derive an independent child stream; children of distinct indices differ."""
        key = _splitmix64(self._key ^ _splitmix64((int(index) + 1) & _M64))
        return RngStream(self.seed, _key=key)

    def uniform(self, shape=()) -> np.ndarray:
        out = self._gen.random(size=shape, dtype=np.float64)
        self.draws += int(np.prod(shape)) if shape else 1
        return out

    def normal(self, shape=(), dtype=np.float32) -> np.ndarray:
        """i.i.d. N(0,1) via Box-Muller over the uniform stream."""
        n = int(np.prod(shape)) if shape else 1
        half = (n + 1) // 2
        u1 = 1.0 - self.uniform((half,))  # in (0, 1], keeps log finite
        u2 = self.uniform((half,))
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(shape).astype(dtype)

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        out = self._gen.integers(low, high, size=shape)
        self.draws += int(np.prod(shape)) if shape else 1
        return out

    def permutation(self, n: int) -> np.ndarray:
        self.draws += n
        return self._gen.permutation(n)

    def generator(self) -> np.random.Generator:
        """Expose the underlying Generator (used for weight init)."""
        return self._gen


def gaussian(stream: RngStream, shape) -> Tensor:
    """Standard-normal tensor drawn from the given stream."""
    return Tensor(stream.normal(tuple(shape)))
