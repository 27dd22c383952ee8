"""Minimal reverse-mode autodiff on numpy arrays.

A ``Tensor`` wraps a numpy array plus an optional gradient buffer and a
backward closure.  Operations build a DAG; calling ``backward()`` on a
scalar loss walks the graph in reverse topological order and accumulates
gradients into every reachable tensor that requires them.

Only the layer set needed by the conditional temporal U-Net and the
observation encoders lives here and in :mod:`flowpolicy.nn.ops` -- this is
not a general-purpose autodiff framework.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "Parameter", "ShapeError", "NonFiniteError", "no_grad"]

_grad_enabled = True


class no_grad:
    """Context manager that skips graph construction (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class ShapeError(ValueError):
    """Raised when operand shapes do not conform."""


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or Inf is detected in a checked buffer."""


class Tensor:
    """n-dimensional float array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=np.float32):
        arr = np.asarray(data, dtype=dtype)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self._not_scalar()

    def _not_scalar(self):
        raise ShapeError(f"expected scalar tensor, got shape {self.data.shape}")

    def numpy(self) -> np.ndarray:
        return self.data

    # -- gradient plumbing ---------------------------------------------

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g: np.ndarray):
        if g.shape != self.data.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match tensor shape {self.data.shape}")
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def assert_finite(self, what: str = "tensor"):
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"non-finite values in {what} (shape {self.data.shape})")

    def backward(self):
        """Backpropagate from a scalar loss.

        Gradients accumulate across repeated calls; the caller is
        responsible for zeroing parameter grads between optimizer steps.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() requires a scalar loss, got shape {self.data.shape}")

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))

        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), dtype=self.data.dtype)


class Parameter(Tensor):
    """A tensor registered as trainable state of a module."""

    def __init__(self, data, dtype=np.float32):
        super().__init__(data, requires_grad=True, dtype=dtype)


def make_result(data: np.ndarray, parents, backward) -> Tensor:
    """Build an op result tensor wired into the graph.

    ``backward`` receives the upstream gradient (same shape as ``data``)
    and must push gradients into the parents via ``accumulate_grad``.
    Gradient tracking is dropped entirely when no parent requires it.
    """
    out = Tensor(data, dtype=data.dtype)
    track = _grad_enabled and any(p.requires_grad or p._parents for p in parents)
    if track:
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out
