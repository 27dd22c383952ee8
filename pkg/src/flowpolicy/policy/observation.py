"""Observation container and batch encoding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Observation", "ObservationLayout"]


@dataclass
class Observation:
    """State vector and/or image with optional affordance heatmap channel."""

    state: np.ndarray | None = None
    image: np.ndarray | None = None  # (C, H, W), values in [0, 1]
    affordance: np.ndarray | None = None  # (1, H, W), values in [0, 1]

    def __post_init__(self):
        if self.state is None and self.image is None and self.affordance is None:
            raise ValueError("observation must carry at least one modality")
        if self.state is not None:
            self.state = np.asarray(self.state, dtype=np.float32)
        if self.image is not None:
            self.image = np.asarray(self.image, dtype=np.float32)
            if self.image.ndim != 3:
                raise ValueError(f"image must be (C,H,W), got shape {self.image.shape}")
        if self.affordance is not None:
            self.affordance = np.asarray(self.affordance, dtype=np.float32)
            if self.affordance.ndim != 3 or self.affordance.shape[0] != 1:
                raise ValueError(f"affordance must be (1,H,W), got shape {self.affordance.shape}")
            if self.affordance.min() < 0.0 or self.affordance.max() > 1.0:
                raise ValueError("affordance heatmap values must lie in [0, 1]")


@dataclass
class ObservationLayout:
    """Fixed per-task declaration of which modalities are present."""

    state_dim: int = 0
    image_channels: int = 0
    image_size: int = 0
    use_affordance: bool = False

    @classmethod
    def of(cls, obs: Observation) -> "ObservationLayout":
        sd = 0 if obs.state is None else int(obs.state.shape[0])
        ic = 0 if obs.image is None else int(obs.image.shape[0])
        sz = 0 if obs.image is None else int(obs.image.shape[1])
        if obs.affordance is not None and obs.image is None:
            sz = int(obs.affordance.shape[1])
        return cls(state_dim=sd, image_channels=ic, image_size=sz, use_affordance=obs.affordance is not None)

    @property
    def has_state(self) -> bool:
        return self.state_dim > 0

    @property
    def has_image(self) -> bool:
        return self.image_channels > 0 or self.use_affordance

    @property
    def total_image_channels(self) -> int:
        return self.image_channels + (1 if self.use_affordance else 0)

    def check(self, obs: Observation):
        if ObservationLayout.of(obs) != self:
            raise ValueError(f"observation does not match declared layout {self}")

    def encode_batch(self, observations) -> tuple:
        """Stack a batch: (states (B,ds) or None, images (B,C(+1),H,W) or None)."""
        states = None
        images = None
        if self.has_state:
            states = np.stack([o.state for o in observations]).astype(np.float32)
        if self.has_image:
            chans = []
            for o in observations:
                parts = []
                if o.image is not None:
                    parts.append(o.image)
                if self.use_affordance:
                    parts.append(o.affordance)
                chans.append(np.concatenate(parts, axis=0))
            images = np.stack(chans).astype(np.float32)
        return states, images
