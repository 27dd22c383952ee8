"""Synthetic affordance scenes: goal + distractor markers on a 64x64 image.

All markers look identical in the image; only the affordance heatmap (a
Gaussian blob centered on the goal pixel) disambiguates which marker the
reach trajectory should approach.  Zeroing the heatmap channel produces
the "without affordance" ablation condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..policy.observation import Observation, ObservationLayout
from ..rng import RngStream
from .dataset import DemoDataset

__all__ = ["AffordanceScene", "gen_affordance_scene", "gen_affordance", "zero_affordance"]

IMG_SIZE = 64
BLOB_SIGMA = 2.5
MARKER_RADIUS = 2.0
START_PIXEL = (54, 8)  # (row, col)
_MARGIN = 8
_MIN_SEP = 14


@dataclass
class AffordanceScene:
    image: np.ndarray  # (1, 64, 64) grayscale in [0, 1]
    heatmap: np.ndarray  # (1, 64, 64) in [0, 1], peak 1 at goal
    goal_pixel: tuple  # (row, col)
    distractor_pixels: list = field(default_factory=list)


def _draw_marker(img: np.ndarray, rc: tuple, radius: float = MARKER_RADIUS):
    rr, cc = np.ogrid[:IMG_SIZE, :IMG_SIZE]
    mask = (rr - rc[0]) ** 2 + (cc - rc[1]) ** 2 <= radius**2
    img[mask] = 1.0


def _gaussian_blob(rc: tuple, sigma: float = BLOB_SIGMA) -> np.ndarray:
    rr, cc = np.ogrid[:IMG_SIZE, :IMG_SIZE]
    d2 = (rr - rc[0]) ** 2 + (cc - rc[1]) ** 2
    return np.exp(-0.5 * d2 / sigma**2).astype(np.float32)


def _sample_pixel(stream: RngStream, taken: list) -> tuple:
    while True:
        r = int(stream.integers(_MARGIN, IMG_SIZE - _MARGIN))
        c = int(stream.integers(_MARGIN, IMG_SIZE - _MARGIN))
        if all((r - tr) ** 2 + (c - tc) ** 2 >= _MIN_SEP**2 for tr, tc in taken):
            return (r, c)


def _reach_trajectory(goal_pixel: tuple, tp: int) -> np.ndarray:
    """Smoothstep-timed straight reach in normalized (x, y) image coordinates."""
    start = np.array([START_PIXEL[1], START_PIXEL[0]], dtype=np.float64) / IMG_SIZE
    goal = np.array([goal_pixel[1], goal_pixel[0]], dtype=np.float64) / IMG_SIZE
    u = np.linspace(0.0, 1.0, tp)
    ease = u * u * (3.0 - 2.0 * u)
    return (start[None, :] + ease[:, None] * (goal - start)[None, :]).astype(np.float32)


def gen_affordance_scene(stream: RngStream, n_distractors: int | None = None, tp: int = 16):
    """One scene plus its expert reach trajectory."""
    if n_distractors is None:
        n_distractors = int(stream.integers(1, 4))
    taken = [START_PIXEL]
    goal = _sample_pixel(stream, taken)
    taken.append(goal)
    distractors = []
    for _ in range(n_distractors):
        p = _sample_pixel(stream, taken)
        taken.append(p)
        distractors.append(p)

    img = np.zeros((IMG_SIZE, IMG_SIZE), dtype=np.float32)
    _draw_marker(img, goal)
    for p in distractors:
        _draw_marker(img, p)
    heat = _gaussian_blob(goal)
    scene = AffordanceScene(
        image=img[None], heatmap=heat[None], goal_pixel=goal, distractor_pixels=distractors
    )
    return scene, _reach_trajectory(goal, tp)


def _layout() -> ObservationLayout:
    return ObservationLayout(image_channels=1, image_size=IMG_SIZE, use_affordance=True)


def gen_affordance(n: int, seed: int, tp: int = 16, n_distractors: int | None = None) -> DemoDataset:
    if n < 1:
        raise ValueError(f"need at least one scene, got {n}")
    stream = RngStream(seed)
    ds = DemoDataset(task_id="affordance", seed=seed, tp=tp, act_dim=2, layout=_layout())
    for _ in range(n):
        scene, traj = gen_affordance_scene(stream, n_distractors=n_distractors, tp=tp)
        ds.add(Observation(image=scene.image, affordance=scene.heatmap), traj)
    return ds


def zero_affordance(dataset: DemoDataset) -> DemoDataset:
    """Copy of the dataset with the heatmap channel zeroed (ablation input)."""
    out = DemoDataset(dataset.task_id + "-noaff", dataset.seed, dataset.tp, dataset.act_dim, dataset.layout)
    for obs, traj in dataset.samples:
        out.add(Observation(image=obs.image, affordance=np.zeros_like(obs.affordance)), traj)
    return out
