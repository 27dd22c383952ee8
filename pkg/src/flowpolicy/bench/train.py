"""Epoch-based training loop with held-out loss tracking and checkpoints."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..envs.dataset import DemoDataset
from ..nn import adamw_step
from ..nn.tensor import NonFiniteError
from ..policy import ArchConfig, PolicyModel, build_policy, ddpm_loss, fm_loss
from ..rng import RngStream

__all__ = ["TrainConfig", "TrainingDiverged", "train"]

log = logging.getLogger("flowpolicy.train")


class TrainingDiverged(RuntimeError):
    """Raised when the training loss turns NaN/Inf; last-good checkpoint is retained."""


@dataclass
class TrainConfig:
    task: str
    policy: str  # fm | ddpm | ddim
    epochs: int
    batch_size: int = 64
    lr: float = 1e-4
    lr_final: float | None = None  # cosine-decay target; None = constant lr
    weight_decay: float = 1e-6
    seed: int = 0
    tp: int = 16
    ta: int = 8
    diffusion_k: int = 16
    checkpoint_every: int = 0  # epochs between checkpoints; 0 = final only
    holdout_fraction: float = 0.1
    channels: tuple = (32, 64)
    groups: int = 8
    time_embed_dim: int = 32

    def __post_init__(self):
        if self.policy not in ("fm", "ddpm", "ddim"):
            raise ValueError(f"unknown policy kind {self.policy!r}")
        if not 1 <= self.ta <= self.tp:
            raise ValueError(f"need 1 <= Ta <= Tp, got Ta={self.ta}, Tp={self.tp}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        self.channels = tuple(self.channels)


def _arch_for(cfg: TrainConfig, data: DemoDataset) -> ArchConfig:
    return ArchConfig(
        tp=data.tp,
        act_dim=data.act_dim,
        layout=data.layout,
        channels=cfg.channels,
        groups=cfg.groups,
        time_embed_dim=cfg.time_embed_dim,
        k_train=cfg.diffusion_k,
    )


def _mean_loss(model: PolicyModel, samples, stream: RngStream, batch_size: int) -> float:
    """Forward-only mean loss over a sample list (no gradient updates)."""
    loss_fn = fm_loss if model.kind == "fm" else ddpm_loss
    total, count = 0.0, 0
    for i in range(0, len(samples), batch_size):
        chunk = samples[i : i + batch_size]
        total += loss_fn(model, chunk, stream).item() * len(chunk)
        count += len(chunk)
    return total / count


def train(cfg: TrainConfig, data: DemoDataset, out_dir=None):
    """Train a policy on the dataset.

    Returns (model, curve) where curve rows are
    (epoch, train_loss, holdout_loss).  Writes checkpoints to out_dir
    when given; a NaN loss aborts with the last-good checkpoint retained.
    """
    if data.task_id != cfg.task:
        raise ValueError(f"dataset task {data.task_id!r} does not match config task {cfg.task!r}")
    from ..persist import save_checkpoint

    root = RngStream(cfg.seed)
    split_stream = root.child(0)
    shuffle_stream = root.child(1)
    noise_stream = root.child(2)
    init_stream = root.child(3)
    holdout_stream = root.child(4)

    train_ds, holdout_ds = data.split(cfg.holdout_fraction, split_stream)
    model = build_policy(cfg.policy, _arch_for(cfg, data), init_stream)
    model.action_norm.fit(train_ds.actions())
    if model.state_norm is not None:
        model.state_norm.fit(train_ds.states())

    loss_fn = fm_loss if cfg.policy == "fm" else ddpm_loss
    samples = train_ds.samples
    curve = []
    ckpt_path = Path(out_dir) / "model.fmck" if out_dir is not None else None

    for epoch in range(cfg.epochs):
        if cfg.lr_final is None or cfg.epochs == 1:
            lr = cfg.lr
        else:
            frac = epoch / (cfg.epochs - 1)
            lr = float(cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1 + np.cos(np.pi * frac)))
        order = shuffle_stream.permutation(len(samples))
        total = 0.0
        for i in range(0, len(samples), cfg.batch_size):
            batch = [samples[j] for j in order[i : i + cfg.batch_size]]
            loss = loss_fn(model, batch, noise_stream)
            value = loss.item()
            if not np.isfinite(value):
                log.error("non-finite loss at epoch %d; aborting", epoch)
                raise TrainingDiverged(f"loss became non-finite at epoch {epoch}")
            model.store.zero_grad()
            loss.backward()
            adamw_step(model.store, lr=lr, wd=cfg.weight_decay)
            total += value * len(batch)
        train_loss = total / len(samples)
        holdout_loss = _mean_loss(model, holdout_ds.samples, holdout_stream, cfg.batch_size)
        curve.append((epoch, train_loss, holdout_loss))
        if ckpt_path is not None and (
            epoch == cfg.epochs - 1 or (cfg.checkpoint_every > 0 and (epoch + 1) % cfg.checkpoint_every == 0)
        ):
            model.store.assert_finite()
            save_checkpoint(model, ckpt_path)
        if epoch % max(1, cfg.epochs // 10) == 0:
            log.info("epoch %d train_loss %.5f holdout_loss %.5f", epoch, train_loss, holdout_loss)

    return model, curve


def write_loss_csv(curve, path) -> None:
    lines = ["epoch,train_loss,holdout_loss"]
    lines += [f"{e},{tr:.6f},{ho:.6f}" for e, tr, ho in curve]
    Path(path).write_text("\n".join(lines) + "\n")
