"""Policy model container: network weights, normalization stats, schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import ParamStore, Tensor
from ..nn.tensor import no_grad
from ..rng import RngStream
from .normalizer import MinMaxNormalizer
from .observation import Observation, ObservationLayout
from .schedule import NoiseSchedule
from .unet import ArchConfig, ConditionalUnet1D, build_unet

__all__ = ["PolicyModel", "build_policy"]

KINDS = ("fm", "ddpm", "ddim")


@dataclass
class PolicyModel:
    kind: str
    arch: ArchConfig
    net: ConditionalUnet1D
    store: ParamStore
    action_norm: MinMaxNormalizer
    state_norm: MinMaxNormalizer | None = None
    schedule: NoiseSchedule | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "fm" and self.schedule is not None:
            raise ValueError("flow-matching model must not carry a noise schedule")
        if self.kind in ("ddpm", "ddim") and self.schedule is None:
            raise ValueError(f"{self.kind} model requires a noise schedule")

    @property
    def tp(self) -> int:
        return self.arch.tp

    @property
    def act_dim(self) -> int:
        return self.arch.act_dim

    # -- batched network evaluation --------------------------------------

    def encode_observations(self, observations) -> tuple:
        states, images = self.arch.layout.encode_batch(observations)
        if states is not None and self.state_norm is not None:
            states = self.state_norm.normalize(states)
        return states, images

    def forward_train(self, x_n: np.ndarray, t_scaled: np.ndarray, states, images) -> Tensor:
        """Graph-building forward; x_n is (B, Tp, ActD) in normalized units."""
        x = Tensor(np.ascontiguousarray(np.transpose(x_n, (0, 2, 1))))
        out = self.net(x, t_scaled, states, images)
        return out

    def predict(self, x_n: np.ndarray, t_scaled: np.ndarray, states, images) -> np.ndarray:
        with no_grad():
            out = self.forward_train(x_n, t_scaled, states, images)
        return np.transpose(out.data, (0, 2, 1))

    # -- conditioned closures used by the samplers ------------------------

    def field_fn(self, obs: Observation, n: int = 1):
        """Velocity field v(x, t | o) in normalized action units, t in [0, 1]."""
        states, images = self.encode_observations([obs] * n)
        scale = self.arch.k_train - 1

        def f(x_n: np.ndarray, t: float) -> np.ndarray:
            t_scaled = np.full(x_n.shape[0], t * scale, dtype=np.float64)
            return self.predict(x_n, t_scaled, states, images)

        return f

    def eps_fn(self, obs: Observation, n: int = 1):
        """Noise predictor eps(x, k | o) over discrete schedule indices."""
        states, images = self.encode_observations([obs] * n)

        def f(x_n: np.ndarray, k: int) -> np.ndarray:
            t_scaled = np.full(x_n.shape[0], float(k), dtype=np.float64)
            return self.predict(x_n, t_scaled, states, images)

        return f

    def sample(self, obs: Observation, steps: int, stream: RngStream, n: int = 1) -> np.ndarray:
        from . import samplers

        if self.kind == "fm":
            return samplers.fm_sample(self, obs, steps, stream, n=n)
        if self.kind == "ddpm":
            return samplers.ddpm_sample(self, obs, steps, stream, n=n)
        return samplers.ddim_sample(self, obs, steps, stream, n=n)

    def sample_each(self, observations, steps: int, stream: RngStream) -> np.ndarray:
        """One trajectory per observation, batched through the network.

        With identical observations this reproduces sample(obs, n=len)
        draw-for-draw; distinct observations share the batch dimension so
        closed-loop evaluation over many conditions costs one forward pass
        per integration step instead of one per condition.
        """
        from . import samplers

        n = len(observations)
        states, images = self.encode_observations(observations)
        if self.kind == "fm":
            scale = self.arch.k_train - 1

            def f(x_n: np.ndarray, t: float) -> np.ndarray:
                t_scaled = np.full(x_n.shape[0], t * scale, dtype=np.float64)
                return self.predict(x_n, t_scaled, states, images)

            return samplers.fm_sample(self, None, steps, stream, n=n, field=f)

        def f(x_n: np.ndarray, k: int) -> np.ndarray:
            t_scaled = np.full(x_n.shape[0], float(k), dtype=np.float64)
            return self.predict(x_n, t_scaled, states, images)

        sampler = samplers.ddpm_sample if self.kind == "ddpm" else samplers.ddim_sample
        return sampler(self, None, steps, stream, n=n, eps_fn=f)


def build_policy(
    kind: str,
    arch: ArchConfig,
    stream: RngStream,
    schedule: NoiseSchedule | None = None,
) -> PolicyModel:
    """Fresh policy with initialized weights and unfitted normalizers."""
    net = build_unet(arch, stream.generator())
    if kind in ("ddpm", "ddim") and schedule is None:
        schedule = NoiseSchedule.cosine(arch.k_train)
    state_norm = MinMaxNormalizer() if arch.layout.has_state else None
    return PolicyModel(
        kind=kind,
        arch=arch,
        net=net,
        store=ParamStore.from_module(net),
        action_norm=MinMaxNormalizer(),
        state_norm=state_norm,
        schedule=schedule if kind != "fm" else None,
    )
