"""Training objectives for the flow-matching and diffusion policies.

Flow matching regresses the network onto the straight-line target field
x1 - x0 along the interpolant x_t = t*x1 + (1-t)*x0.  The diffusion
objective regresses predicted noise onto the true corruption noise at a
uniformly sampled schedule index.
"""

from __future__ import annotations

import numpy as np

from ..nn import Tensor, ops
from ..rng import RngStream
from .model import PolicyModel
from .schedule import NoiseSchedule

__all__ = ["interpolate", "fm_loss", "ddpm_forward_sample", "ddpm_loss"]


def interpolate(x0: np.ndarray, x1: np.ndarray, t: float) -> np.ndarray:
    """Elementwise t*x1 + (1-t)*x0 for t in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation time {t} outside [0, 1]")
    x0 = np.asarray(x0, dtype=np.float32)
    x1 = np.asarray(x1, dtype=np.float32)
    if x0.shape != x1.shape:
        raise ValueError(f"endpoint shapes differ: {x0.shape} vs {x1.shape}")
    return (t * x1 + (1.0 - t) * x0).astype(np.float32)


def _prepare_batch(model: PolicyModel, batch):
    if len(batch) == 0:
        raise ValueError("empty training batch")
    observations = [obs for obs, _ in batch]
    actions = np.stack([traj for _, traj in batch]).astype(np.float32)
    x1n = model.action_norm.normalize(actions)
    states, images = model.encode_observations(observations)
    return x1n, states, images


def fm_loss(model: PolicyModel, batch, stream: RngStream) -> Tensor:
    """Mean squared field-regression error, backward-ready."""
    if model.kind != "fm":
        raise ValueError(f"fm_loss requires an fm model, got kind {model.kind!r}")
    x1n, states, images = _prepare_batch(model, batch)
    B = x1n.shape[0]
    x0 = stream.normal(x1n.shape)
    t = stream.uniform((B,))
    tt = t[:, None, None].astype(np.float32)
    x_t = tt * x1n + (1.0 - tt) * x0
    target = np.transpose(x1n - x0, (0, 2, 1))
    t_scaled = t * (model.arch.k_train - 1)
    v = model.forward_train(x_t, t_scaled, states, images)
    return ops.mse(v, np.ascontiguousarray(target))


def ddpm_forward_sample(x0clean: np.ndarray, k: int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Closed-form forward corruption sqrt(ab_k)*x0 + sqrt(1-ab_k)*eps."""
    if not 0 <= k < schedule.num_train_steps:
        raise ValueError(f"schedule index {k} outside [0, {schedule.num_train_steps})")
    ab = schedule.alpha_bars[k]
    return (np.sqrt(ab) * np.asarray(x0clean) + np.sqrt(1.0 - ab) * np.asarray(eps)).astype(np.float32)


def ddpm_loss(model: PolicyModel, batch, stream: RngStream) -> Tensor:
    """Noise-estimation MSE at a uniformly sampled schedule index (shared by ddim)."""
    if model.kind not in ("ddpm", "ddim"):
        raise ValueError(f"ddpm_loss requires a diffusion model, got kind {model.kind!r}")
    x1n, states, images = _prepare_batch(model, batch)
    B = x1n.shape[0]
    K = model.schedule.num_train_steps
    k = stream.integers(0, K, (B,))
    eps = stream.normal(x1n.shape)
    ab = model.schedule.alpha_bars[k][:, None, None].astype(np.float32)
    x_k = np.sqrt(ab) * x1n + np.sqrt(1.0 - ab) * eps
    target = np.transpose(eps, (0, 2, 1))
    pred = model.forward_train(x_k, k.astype(np.float64), states, images)
    return ops.mse(pred, np.ascontiguousarray(target))
