"""Per-dimension min/max normalization to [-1, 1]."""

from __future__ import annotations

import logging

import numpy as np

__all__ = ["MinMaxNormalizer", "UnfittedError"]

log = logging.getLogger("flowpolicy.normalizer")


class UnfittedError(RuntimeError):
    """Normalizer used before fit() or construction from stats."""


class MinMaxNormalizer:
    """Affine map of each dimension to [-1, 1] and back.

    Degenerate dimensions (max == min) normalize to 0 and denormalize to
    the constant; they are flagged with a warning at fit time.
    """

    def __init__(self, mins: np.ndarray | None = None, maxs: np.ndarray | None = None):
        self.mins = None if mins is None else np.asarray(mins, dtype=np.float64)
        self.maxs = None if maxs is None else np.asarray(maxs, dtype=np.float64)
        if (self.mins is None) != (self.maxs is None):
            raise ValueError("mins and maxs must be given together")
        if self.mins is not None:
            self._finalize()

    @property
    def fitted(self) -> bool:
        return self.mins is not None

    def _finalize(self):
        self._span = self.maxs - self.mins
        self._degenerate = self._span <= 0
        if np.any(self._degenerate):
            log.warning(
                "normalizer has %d degenerate dimension(s); mapping them to 0",
                int(self._degenerate.sum()),
            )
        self._safe_span = np.where(self._degenerate, 1.0, self._span)

    def fit(self, data: np.ndarray) -> "MinMaxNormalizer":
        """Fit stats over all leading axes; the last axis is the dimension."""
        flat = np.asarray(data, dtype=np.float64).reshape(-1, data.shape[-1])
        self.mins = flat.min(axis=0)
        self.maxs = flat.max(axis=0)
        self._finalize()
        return self

    def _check(self):
        if not self.fitted:
            raise UnfittedError("normalizer statistics have not been fitted")

    def normalize(self, x: np.ndarray) -> np.ndarray:
        self._check()
        xn = 2.0 * (np.asarray(x, dtype=np.float64) - self.mins) / self._safe_span - 1.0
        xn = np.where(self._degenerate, 0.0, xn)
        return xn.astype(np.float32)

    def denormalize(self, xn: np.ndarray) -> np.ndarray:
        self._check()
        x = (np.asarray(xn, dtype=np.float64) + 1.0) / 2.0 * self._safe_span + self.mins
        x = np.where(self._degenerate, self.mins, x)
        return x.astype(np.float32)

    @classmethod
    def identity(cls, dim: int) -> "MinMaxNormalizer":
        """Stats mapping [-1, 1] to itself (handy for stubs and tests)."""
        return cls(mins=-np.ones(dim), maxs=np.ones(dim))
