"""Named parameter store and decoupled-weight-decay AdamW."""

from __future__ import annotations

import numpy as np

from .tensor import NonFiniteError, Parameter

__all__ = ["ParamStore", "MissingGradError", "adamw_step"]


class MissingGradError(RuntimeError):
    """A parameter had no gradient when an optimizer step was taken."""


class ParamStore:
    """Named map of parameters plus per-parameter AdamW moment state."""

    def __init__(self, named_params):
        self.params: dict[str, Parameter] = {}
        for name, p in named_params:
            if name in self.params:
                raise ValueError(f"duplicate parameter name {name!r}")
            self.params[name] = p
        self.m = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self.step_count = 0

    @classmethod
    def from_module(cls, module) -> "ParamStore":
        return cls(module.named_parameters())

    def __len__(self):
        return len(self.params)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def num_values(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def assert_finite(self):
        for name, p in self.params.items():
            if not np.all(np.isfinite(p.data)):
                raise NonFiniteError(f"non-finite values in parameter {name!r}")


def adamw_step(
    store: ParamStore,
    lr: float,
    wd: float = 0.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One AdamW update with bias correction and decoupled weight decay.

    Gradients are left untouched; the caller zeroes them between steps.
    """
    for name, p in store.params.items():
        if p.grad is None:
            raise MissingGradError(f"parameter {name!r} has no gradient")

    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in store.params.items():
        g = p.grad
        if wd != 0.0:
            p.data *= 1.0 - lr * wd
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
