"""Trajectory generation: Euler flow integration, ancestral DDPM, DDIM.

All three samplers share the conditioned network; only the update rule
differs.  fm_sample and ddim_sample are pure functions of
(model, observation, steps, stream seed); ddpm_sample additionally draws
fresh noise at every step except the last.
"""

from __future__ import annotations

import numpy as np

from ..rng import RngStream

__all__ = ["strided_indices", "fm_sample", "ddpm_sample", "ddim_sample"]


def strided_indices(num_train_steps: int, steps: int) -> list:
    """Floor-spaced subset of schedule indices, ascending."""
    if steps < 1:
        raise ValueError(f"inference steps must be >= 1, got {steps}")
    if steps > num_train_steps:
        raise ValueError(f"inference steps {steps} exceed schedule length {num_train_steps}")
    return [i * num_train_steps // steps for i in range(steps)]


def fm_sample(model, obs, steps: int, stream: RngStream, n: int = 1, field=None) -> np.ndarray:
    """Explicit Euler integration of the learned field from t=0 to t=1.

    Returns denormalized trajectories of shape (n, Tp, ActD).
    """
    if steps < 1:
        raise ValueError(f"inference steps must be >= 1, got {steps}")
    x = stream.normal((n, model.tp, model.act_dim))
    f = field if field is not None else model.field_fn(obs, n)
    dt = 1.0 / steps
    for i in range(steps):
        t = i * dt
        x = x + dt * f(x, t)
    return model.action_norm.denormalize(x)


def _diffusion_sample(model, obs, steps, stream, n, eta, eps_fn, clip_x0=True) -> np.ndarray:
    if model.schedule is None:
        raise ValueError("diffusion sampling requires a model with a noise schedule")
    K = model.schedule.num_train_steps
    idx = strided_indices(K, steps)
    ab = model.schedule.alpha_bars
    x = stream.normal((n, model.tp, model.act_dim)).astype(np.float64)
    f = eps_fn if eps_fn is not None else model.eps_fn(obs, n)
    for i in reversed(range(len(idx))):
        k = idx[i]
        ab_k = ab[k]
        ab_prev = ab[idx[i - 1]] if i > 0 else 1.0
        eps = f(x.astype(np.float32), k).astype(np.float64)
        x0hat = (x - np.sqrt(1.0 - ab_k) * eps) / np.sqrt(ab_k)
        if clip_x0:
            x0hat = np.clip(x0hat, -1.0, 1.0)
        var = 0.0
        if eta > 0.0 and i > 0:
            var = (eta**2) * (1.0 - ab_prev) / (1.0 - ab_k) * (1.0 - ab_k / ab_prev)
            var = min(var, 1.0 - ab_prev)
        x = np.sqrt(ab_prev) * x0hat + np.sqrt(max(1.0 - ab_prev - var, 0.0)) * eps
        if var > 0.0:
            x += np.sqrt(var) * stream.normal(x.shape).astype(np.float64)
    return model.action_norm.denormalize(x.astype(np.float32))


def ddpm_sample(model, obs, steps: int, stream: RngStream, n: int = 1, eps_fn=None, clip_x0=True) -> np.ndarray:
    """Stochastic ancestral sampling over a strided subset of schedule indices."""
    return _diffusion_sample(model, obs, steps, stream, n, eta=1.0, eps_fn=eps_fn, clip_x0=clip_x0)


def ddim_sample(model, obs, steps: int, stream: RngStream, n: int = 1, eps_fn=None, clip_x0=True) -> np.ndarray:
    """Deterministic (eta=0) sampling reusing the DDPM-trained noise predictor."""
    return _diffusion_sample(model, obs, steps, stream, n, eta=0.0, eps_fn=eps_fn, clip_x0=clip_x0)
