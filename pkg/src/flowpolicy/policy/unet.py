"""Conditional temporal U-Net.

The backbone is shared verbatim across the flow-matching field and the
diffusion noise predictor: residual conv1d blocks with group norm and
Mish, FiLM conditioning from (sinusoidal time embedding ++ observation
embedding), strided downsampling and nearest-neighbor upsampling with
skip concatenation.  A final conv maps back to the action channels.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..nn import Conv1d, Conv2d, Dense, GroupNorm, LayerSpec, Module, ModuleList, Tensor, ops
from .observation import ObservationLayout

__all__ = ["ArchConfig", "ConditionalUnet1D", "time_embedding", "build_unet"]


@dataclass
class ArchConfig:
    """Shape and size descriptor for the conditional U-Net."""

    tp: int
    act_dim: int
    layout: ObservationLayout
    channels: tuple = (32, 64)
    kernel: int = 3
    groups: int = 8
    time_embed_dim: int = 32
    k_train: int = 16  # time-embedding scale; diffusion train steps for ddpm/ddim
    state_emb_dim: int = 32
    image_emb_dim: int = 32
    enc_channels: tuple = (8, 16, 32)

    def __post_init__(self):
        if isinstance(self.layout, dict):
            self.layout = ObservationLayout(**self.layout)
        self.channels = tuple(self.channels)
        self.enc_channels = tuple(self.enc_channels)
        factor = 2 ** (len(self.channels) - 1)
        if self.tp % factor != 0:
            raise ValueError(f"prediction horizon {self.tp} not divisible by downsample factor {factor}")
        if self.time_embed_dim % 2 != 0:
            raise ValueError("time_embed_dim must be even")

    @property
    def cond_dim(self) -> int:
        d = self.time_embed_dim
        if self.layout.has_state:
            d += self.state_emb_dim
        if self.layout.has_image:
            d += self.image_emb_dim
        return d

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ArchConfig":
        return cls(**json.loads(text))


def time_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal embedding of (scaled) timestep values, shape (B, dim)."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    ang = np.asarray(t, dtype=np.float64)[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1).astype(np.float32)


class ResBlock1d(Module):
    def __init__(self, cin: int, cout: int, cond_dim: int, kernel: int, groups: int, rng):
        self.conv1 = Conv1d(cin, cout, kernel, rng)
        self.gn1 = GroupNorm(cout, groups)
        self.cond_proj = Dense(cond_dim, 2 * cout, rng)
        self.conv2 = Conv1d(cout, cout, kernel, rng)
        self.gn2 = GroupNorm(cout, groups)
        self.skip = Conv1d(cin, cout, 1, rng) if cin != cout else None

    def forward(self, x: Tensor, cond: Tensor) -> Tensor:
        h = ops.film(self.gn1(self.conv1(x)), self.cond_proj(cond))
        h = ops.mish(h)
        h = ops.mish(self.gn2(self.conv2(h)))
        res = self.skip(x) if self.skip is not None else x
        return ops.add(h, res)


class StateEncoder(Module):
    """2-layer dense MLP for vector observations."""

    def __init__(self, state_dim: int, emb_dim: int, rng):
        self.fc1 = Dense(state_dim, 2 * emb_dim, rng)
        self.fc2 = Dense(2 * emb_dim, emb_dim, rng)

    def forward(self, s: Tensor) -> Tensor:
        return self.fc2(ops.mish(self.fc1(s)))


class ImageEncoder(Module):
    """3-block strided conv encoder with global average pooling.

    Two fixed coordinate channels are appended to the input; without them
    the global pooling would discard the absolute position of salient
    pixels (e.g. where a goal marker sits), which downstream conditioning
    needs.
    """

    def __init__(self, in_channels: int, enc_channels: tuple, emb_dim: int, rng):
        blocks = []
        cin = in_channels + 2
        for cout in enc_channels:
            blocks.append(Conv2d(cin, cout, 3, rng, stride=2))
            blocks.append(GroupNorm(cout, groups=min(4, cout)))
            cin = cout
        self.blocks = ModuleList(blocks)
        self.head = Dense(cin, emb_dim, rng)
        self._coord_cache: dict = {}

    def _coords(self, b: int, h: int, w: int) -> np.ndarray:
        if (h, w) not in self._coord_cache:
            xs = np.linspace(-1.0, 1.0, w, dtype=np.float32)
            ys = np.linspace(-1.0, 1.0, h, dtype=np.float32)
            gx = np.repeat(xs[None, :], h, axis=0)
            gy = np.repeat(ys[:, None], w, axis=1)
            self._coord_cache[(h, w)] = np.stack([gx, gy])[None]  # (1, 2, H, W)
        return np.ascontiguousarray(np.broadcast_to(self._coord_cache[(h, w)], (b, 2, h, w)))

    def forward(self, img: Tensor) -> Tensor:
        b, _, hh, ww = img.data.shape
        h = ops.concat([img, Tensor(self._coords(b, hh, ww))], axis=1)
        mods = list(self.blocks)
        for conv, gn in zip(mods[0::2], mods[1::2]):
            h = ops.mish(gn(conv(h)))
        h = ops.mean_axes(h, (2, 3))
        return self.head(h)


class ConditionalUnet1D(Module):
    def __init__(self, arch: ArchConfig, rng: np.random.Generator):
        self.arch = arch
        cd = arch.cond_dim
        ted = arch.time_embed_dim

        self.time_fc1 = Dense(ted, 4 * ted, rng)
        self.time_fc2 = Dense(4 * ted, ted, rng)

        self.state_enc = StateEncoder(arch.layout.state_dim, arch.state_emb_dim, rng) if arch.layout.has_state else None
        self.image_enc = (
            ImageEncoder(arch.layout.total_image_channels, arch.enc_channels, arch.image_emb_dim, rng)
            if arch.layout.has_image
            else None
        )

        chans = arch.channels
        L = len(chans)
        down, downsamples = [], []
        cin = arch.act_dim
        for i, c in enumerate(chans):
            down.append(ResBlock1d(cin, c, cd, arch.kernel, arch.groups, rng))
            cin = c
            if i < L - 1:
                downsamples.append(Conv1d(c, c, arch.kernel, rng, stride=2))
        self.down = ModuleList(down)
        self.downsamples = ModuleList(downsamples)
        self.mid = ResBlock1d(chans[-1], chans[-1], cd, arch.kernel, arch.groups, rng)

        up, upsamples = [], []
        for i in reversed(range(L)):
            cout = chans[i - 1] if i > 0 else chans[0]
            up.append(ResBlock1d(2 * chans[i], cout, cd, arch.kernel, arch.groups, rng))
            if i > 0:
                upsamples.append(Conv1d(chans[i - 1], chans[i - 1], arch.kernel, rng))
        self.up = ModuleList(up)
        self.upsamples = ModuleList(upsamples)

        self.final_gn = GroupNorm(chans[0], arch.groups)
        self.final_conv = Conv1d(chans[0], arch.act_dim, 1, rng)

    def cond_vector(self, t_scaled: np.ndarray, states: np.ndarray | None, images: np.ndarray | None) -> Tensor:
        temb = Tensor(time_embedding(t_scaled, self.arch.time_embed_dim))
        temb = self.time_fc2(ops.mish(self.time_fc1(temb)))
        parts = [temb]
        if self.state_enc is not None:
            parts.append(self.state_enc(Tensor(states)))
        if self.image_enc is not None:
            parts.append(self.image_enc(Tensor(images)))
        return parts[0] if len(parts) == 1 else ops.concat(parts, axis=1)

    def forward(self, x: Tensor, t_scaled: np.ndarray, states=None, images=None) -> Tensor:
        """x: (B, ActD, Tp) -> (B, ActD, Tp)."""
        cond = self.cond_vector(t_scaled, states, images)
        skips = []
        h = x
        L = len(self.arch.channels)
        downs = list(self.down)
        dsamp = list(self.downsamples)
        for i in range(L):
            h = downs[i](h, cond)
            skips.append(h)
            if i < L - 1:
                h = dsamp[i](h)
        h = self.mid(h, cond)
        ups = list(self.up)
        usamp = list(self.upsamples)
        for j, i in enumerate(reversed(range(L))):
            h = ops.concat([h, skips[i]], axis=1)
            h = ups[j](h, cond)
            if i > 0:
                h = usamp[j](ops.upsample_nearest1d(h))
        h = ops.mish(self.final_gn(h))
        return self.final_conv(h)

    def layer_specs(self) -> list:
        """Flat architecture descriptor (validates structural invariants)."""
        a = self.arch
        specs = [LayerSpec("dense", {"din": a.time_embed_dim, "dout": 4 * a.time_embed_dim})]
        chans = a.channels
        cin = a.act_dim
        for i, c in enumerate(chans):
            specs.append(LayerSpec("conv1d", {"cin": cin, "cout": c, "kernel": a.kernel}))
            specs.append(LayerSpec("groupnorm", {"channels": c, "groups": a.groups}))
            specs.append(LayerSpec("film", {"channels": c}))
            specs.append(LayerSpec("activation", {"name": "mish"}))
            cin = c
            if i < len(chans) - 1:
                specs.append(LayerSpec("downsample", {"channels": c, "kernel": a.kernel}))
        for i in reversed(range(len(chans))):
            cout = chans[i - 1] if i > 0 else chans[0]
            specs.append(LayerSpec("conv1d", {"cin": 2 * chans[i], "cout": cout, "kernel": a.kernel}))
            if i > 0:
                specs.append(LayerSpec("upsample", {"channels": cout}))
        specs.append(LayerSpec("conv1d", {"cin": chans[0], "cout": a.act_dim, "kernel": 1}))
        return specs


def build_unet(arch: ArchConfig, rng: np.random.Generator) -> ConditionalUnet1D:
    net = ConditionalUnet1D(arch, rng)
    net.layer_specs()  # raises on invalid configuration
    return net
