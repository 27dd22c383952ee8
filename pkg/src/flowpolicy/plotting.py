"""Matplotlib figure rendering for the CLI report paths (file output only)."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_loss_curve", "plot_metrics", "plot_dataset"]


def _read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_loss_curve(loss_csv, out_png) -> Path:
    rows = _read_csv(loss_csv)
    epochs = [int(r["epoch"]) for r in rows]
    train = [float(r["train_loss"]) for r in rows]
    hold = [float(r["holdout_loss"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, train, label="train")
    ax.plot(epochs, hold, label="holdout")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    ax.set_title("training loss")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return Path(out_png)


def plot_metrics(metrics_csv, out_dir) -> list:
    """Metric-vs-steps and latency-vs-steps figures, one line per policy."""
    rows = _read_csv(metrics_csv)
    out_dir = Path(out_dir)
    by_policy: dict[str, list] = {}
    for r in rows:
        by_policy.setdefault(r["policy"], []).append(r)

    written = []
    for field, fname, ylabel in (
        ("metric", "metric_vs_steps.png", "metric"),
        ("latency_ms_mean", "latency_vs_steps.png", "latency per sample (ms)"),
    ):
        fig, ax = plt.subplots(figsize=(6, 4))
        for policy, rs in sorted(by_policy.items()):
            rs = sorted(rs, key=lambda r: int(r["steps"]))
            ax.plot([int(r["steps"]) for r in rs], [float(r[field]) for r in rs], marker="o", label=policy)
        ax.set_xlabel("inference steps")
        ax.set_ylabel(ylabel)
        ax.set_xscale("log", base=2)
        ax.legend()
        ax.set_title(ylabel + " vs inference steps")
        fig.tight_layout()
        path = out_dir / fname
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def plot_dataset(dataset, out_png, max_trajs: int = 64) -> Path:
    """Quick-look figure of a demonstration dataset."""
    fig, ax = plt.subplots(figsize=(5, 5))
    if dataset.layout.image_channels > 0:
        obs, traj = dataset.samples[0]
        ax.imshow(obs.image[0], cmap="gray", extent=(0, 1, 1, 0))
        if dataset.layout.use_affordance:
            ax.imshow(obs.affordance[0], cmap="inferno", alpha=0.4, extent=(0, 1, 1, 0))
        ax.plot(traj[:, 0], traj[:, 1], "c.-")
        ax.set_ylim(1, 0)
    else:
        for _, traj in dataset.samples[:max_trajs]:
            ax.plot(traj[:, 0], traj[:, 1], alpha=0.4)
        ax.set_aspect("equal")
    ax.set_title(f"{dataset.task_id}: {len(dataset)} samples")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return Path(out_png)
