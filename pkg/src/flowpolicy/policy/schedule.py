"""Discrete diffusion noise schedule (betas and cumulative alpha-bars)."""

from __future__ import annotations

import numpy as np

__all__ = ["NoiseSchedule"]


class NoiseSchedule:
    """K-step schedule: beta_k in (0,1), alpha_bar_k = prod_{j<=k}(1 - beta_j)."""

    def __init__(self, betas: np.ndarray, validate: bool = True):
        self.betas = np.asarray(betas, dtype=np.float64)
        if self.betas.ndim != 1 or self.betas.size < 1:
            raise ValueError("betas must be a non-empty 1-d array")
        if np.any(self.betas <= 0) or np.any(self.betas >= 1):
            raise ValueError("betas must lie strictly inside (0, 1)")
        self.alpha_bars = np.cumprod(1.0 - self.betas)
        if validate:
            self._validate()

    def _validate(self):
        ab = self.alpha_bars
        if np.any(np.diff(ab) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if ab[0] <= 0.99:
            raise ValueError(f"alpha_bar_0 = {ab[0]:.4f} is not close to 1 (> 0.99 required)")
        if ab[-1] >= 0.01:
            raise ValueError(f"alpha_bar_K-1 = {ab[-1]:.4f} is not small (< 0.01 required)")

    @property
    def num_train_steps(self) -> int:
        return self.betas.size

    @classmethod
    def cosine(cls, num_steps: int, s: float = 0.008, beta_clip: tuple = (1e-4, 0.999)) -> "NoiseSchedule":
        """Squared-cosine alpha-bar curve with betas clipped into beta_clip.

        Alpha-bars are evaluated at half-step offsets so the first step
        stays nearly noise-free even for short schedules.
        """
        k = np.arange(num_steps, dtype=np.float64)
        f = np.cos((( (k + 0.5) / num_steps) + s) / (1.0 + s) * np.pi / 2.0) ** 2
        f0 = np.cos(s / (1.0 + s) * np.pi / 2.0) ** 2
        abar = f / f0
        betas = np.empty(num_steps)
        betas[0] = 1.0 - abar[0]
        betas[1:] = 1.0 - abar[1:] / abar[:-1]
        betas = np.clip(betas, beta_clip[0], beta_clip[1])
        return cls(betas)
