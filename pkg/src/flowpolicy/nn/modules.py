"""Layer modules and architecture descriptors.

Weight init is Kaiming-uniform over fan-in for dense/conv weights, zeros
for biases, ones/zeros for norm affine.  Constructors take a numpy
``Generator`` so identical seeds reproduce identical parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .tensor import Parameter, ShapeError, Tensor

__all__ = ["Module", "ModuleList", "Dense", "Conv1d", "Conv2d", "GroupNorm", "LayerSpec"]

_LAYER_KINDS = ("dense", "conv1d", "conv2d", "groupnorm", "activation", "film", "downsample", "upsample")


@dataclass
class LayerSpec:
    """Descriptor of one layer of a network architecture."""

    kind: str
    dims: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        k = self.dims.get("kernel")
        if self.kind in ("conv1d", "conv2d", "downsample") and k is not None and k % 2 == 0:
            raise ValueError(f"{self.kind}: kernel size must be odd, got {k}")
        if self.kind == "groupnorm":
            c, g = self.dims["channels"], self.dims["groups"]
            if c % g != 0:
                raise ValueError(f"groupnorm: groups={g} does not divide channels={c}")


class Module:
    """Base class with recursive named-parameter discovery."""

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{full}.")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p


class ModuleList(Module):
    def __init__(self, modules=()):
        for i, m in enumerate(modules):
            setattr(self, str(i), m)

    def __iter__(self):
        return iter(v for v in vars(self).values() if isinstance(v, Module))

    def __getitem__(self, i):
        return getattr(self, str(i))


def _kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class Dense(Module):
    def __init__(self, din: int, dout: int, rng: np.random.Generator):
        self.w = Parameter(_kaiming_uniform(rng, (dout, din), din))
        self.b = Parameter(np.zeros(dout, dtype=np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return ops.dense(x, self.w, self.b)


class Conv1d(Module):
    def __init__(self, cin: int, cout: int, kernel: int, rng: np.random.Generator, stride: int = 1):
        if kernel % 2 == 0:
            raise ShapeError(f"Conv1d: kernel size must be odd, got {kernel}")
        self.stride = stride
        self.k = Parameter(_kaiming_uniform(rng, (cout, cin, kernel), cin * kernel))
        self.b = Parameter(np.zeros(cout, dtype=np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv1d(x, self.k, self.b, stride=self.stride)


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, kernel: int, rng: np.random.Generator, stride: int = 1):
        if kernel % 2 == 0:
            raise ShapeError(f"Conv2d: kernel size must be odd, got {kernel}")
        self.stride = stride
        self.k = Parameter(_kaiming_uniform(rng, (cout, cin, kernel, kernel), cin * kernel * kernel))
        self.b = Parameter(np.zeros(cout, dtype=np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.k, self.b, stride=self.stride)


class GroupNorm(Module):
    def __init__(self, channels: int, groups: int, eps: float = 1e-5):
        if channels % groups != 0:
            raise ShapeError(f"GroupNorm: groups={groups} does not divide channels={channels}")
        self.groups = groups
        self.eps = eps
        self.gamma = Parameter(np.ones(channels, dtype=np.float32))
        self.beta = Parameter(np.zeros(channels, dtype=np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return ops.groupnorm(x, self.gamma, self.beta, self.groups, self.eps)
