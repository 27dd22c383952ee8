"""Bimodal 2D reach task: detour left or right around a disk obstacle.

Demonstrations are smooth sine-bump arcs from start to goal whose detour
side is Bernoulli(p_left) and whose amplitude varies per demo.  Every
demo clears the obstacle disk by at least the configured margin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..policy.observation import Observation, ObservationLayout
from ..rng import RngStream
from .dataset import DemoDataset

__all__ = ["BimodalReachTask", "gen_bimodal"]


@dataclass
class BimodalReachTask:
    start: tuple = (0.1, 0.5)
    goal: tuple = (0.9, 0.5)
    obstacle_center: tuple = (0.5, 0.5)
    obstacle_radius: float = 0.12
    margin: float = 0.06
    p_left: float = 0.5
    tp: int = 16

    ACT_DIM = 2

    def layout(self) -> ObservationLayout:
        return ObservationLayout(state_dim=4)

    def observation(self) -> Observation:
        return Observation(state=np.array([*self.start, *self.goal], dtype=np.float32))

    def arc(self, amplitude: float, side: int) -> np.ndarray:
        """Sine-bump arc; side +1 detours left (+y), -1 right (-y)."""
        u = np.linspace(0.0, 1.0, self.tp)
        s = np.asarray(self.start)
        g = np.asarray(self.goal)
        base = s[None, :] + u[:, None] * (g - s)[None, :]
        normal = np.array([0.0, 1.0])
        traj = base + side * amplitude * np.sin(np.pi * u)[:, None] * normal[None, :]
        return traj.astype(np.float32)

    def min_obstacle_distance(self, traj: np.ndarray) -> float:
        d = np.linalg.norm(traj - np.asarray(self.obstacle_center)[None, :], axis=1)
        return float(d.min())

    def intersects_obstacle(self, traj: np.ndarray) -> bool:
        return self.min_obstacle_distance(traj) < self.obstacle_radius

    def mode_of(self, traj: np.ndarray) -> int:
        """+1 for a left detour, -1 for right (sign of the mid-waypoint offset)."""
        mid_y = traj[self.tp // 2, 1]
        return 1 if mid_y >= self.obstacle_center[1] else -1

    def amplitude_range(self) -> tuple:
        lo = self.obstacle_radius + self.margin + 0.02
        return (lo, lo + 0.12)


def gen_bimodal(n: int, p_left: float, seed: int, task: BimodalReachTask | None = None) -> DemoDataset:
    """n smooth demos, a fraction p_left detouring left of the obstacle."""
    if n < 1:
        raise ValueError(f"need at least one demonstration, got {n}")
    if not 0.0 <= p_left <= 1.0:
        raise ValueError(f"p_left={p_left} outside [0, 1]")
    task = task or BimodalReachTask(p_left=p_left)
    stream = RngStream(seed)
    lo, hi = task.amplitude_range()
    ds = DemoDataset(
        task_id="bimodal",
        seed=seed,
        tp=task.tp,
        act_dim=task.ACT_DIM,
        layout=task.layout(),
    )
    for _ in range(n):
        side = 1 if stream.uniform() < p_left else -1
        amp = lo + (hi - lo) * stream.uniform()
        traj = task.arc(float(amp), side)
        assert task.min_obstacle_distance(traj) >= task.obstacle_radius + task.margin
        ds.add(task.observation(), traj)
    return ds


def mode_prototypes(dataset: DemoDataset, task: BimodalReachTask | None = None) -> list:
    """Mean trajectory of each demonstrated mode present in the dataset."""
    task = task or BimodalReachTask()
    by_mode: dict[int, list] = {}
    for _, traj in dataset.samples:
        by_mode.setdefault(task.mode_of(traj), []).append(traj)
    return [np.mean(np.stack(v), axis=0) for _, v in sorted(by_mode.items())]
