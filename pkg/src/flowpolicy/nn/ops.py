"""Differentiable operations for the policy networks.

Every function here performs the forward computation with numpy and wires
an exact backward closure into the graph.  Convolutions use a small loop
over kernel taps (kernels are 3 or 5 wide) so each tap is a single BLAS
einsum; reduction order inside a batch is therefore fixed and results are
deterministic for identical inputs.
"""

from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor, make_result

__all__ = [
    "add",
    "sub",
    "scale",
    "mul",
    "dense",
    "conv1d",
    "conv2d",
    "groupnorm",
    "film",
    "mish",
    "concat",
    "upsample_nearest1d",
    "mean_axes",
    "mean",
    "mse",
    "reshape",
]


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g)

    return make_result(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} differ")

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(-g)

    return make_result(a.data - b.data, (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    a = _as_tensor(a)
    s = float(s)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * s)

    return make_result(a.data * s, (a,), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * b.data)
        if b.requires_grad:
            b.accumulate_grad(g * a.data)

    return make_result(a.data * b.data, (a, b), backward)


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """out[i, j] = sum_k x[i, k] * w[j, k] + b[j]."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2:
        raise ShapeError(f"dense: expected 2-d x and w, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"dense: input features {x.shape[1]} != weight features {w.shape[1]}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"dense: bias shape {b.shape} != ({w.shape[0]},)")

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g @ w.data)
        if w.requires_grad:
            w.accumulate_grad(g.T @ x.data)
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=0))

    return make_result(x.data @ w.data.T + b.data, (x, w, b), backward)


def conv1d(x: Tensor, k: Tensor, b: Tensor, stride: int = 1) -> Tensor:
    """Temporal cross-correlation with zero same-padding.

    x: (B, Cin, T), k: (Cout, Cin, K) with K odd, b: (Cout,).
    Output length is T for stride 1 and T // stride when stride divides T.
    """
    x, k, b = _as_tensor(x), _as_tensor(k), _as_tensor(b)
    if x.data.ndim != 3 or k.data.ndim != 3:
        raise ShapeError(f"conv1d: expected (B,Cin,T) and (Cout,Cin,K), got {x.shape} and {k.shape}")
    B, cin, T = x.shape
    cout, cin_k, K = k.shape
    if K % 2 == 0:
        raise ShapeError(f"conv1d: kernel size must be odd, got {K}")
    if cin != cin_k:
        raise ShapeError(f"conv1d: input channels {cin} != kernel channels {cin_k}")
    if b.shape != (cout,):
        raise ShapeError(f"conv1d: bias shape {b.shape} != ({cout},)")

    P = K // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (P, P)))
    To = (T + 2 * P - K) // stride + 1
    out = np.zeros((B, cout, To), dtype=x.data.dtype)
    for u in range(K):
        xs = xp[:, :, u : u + stride * To : stride]
        out += np.einsum("bct,oc->bot", xs, k.data[:, :, u], optimize=True)
    out += b.data[None, :, None]

    def backward(g):
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=(0, 2)))
        if k.requires_grad:
            dk = np.empty_like(k.data)
            for u in range(K):
                xs = xp[:, :, u : u + stride * To : stride]
                dk[:, :, u] = np.einsum("bot,bct->oc", g, xs, optimize=True)
            k.accumulate_grad(dk)
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for u in range(K):
                dxp[:, :, u : u + stride * To : stride] += np.einsum(
                    "bot,oc->bct", g, k.data[:, :, u], optimize=True
                )
            x.accumulate_grad(dxp[:, :, P : P + T])

    return make_result(out, (x, k, b), backward)


def conv2d(x: Tensor, k: Tensor, b: Tensor, stride: int = 1) -> Tensor:
    """2-d cross-correlation with zero same-padding (odd square kernels)."""
    x, k, b = _as_tensor(x), _as_tensor(k), _as_tensor(b)
    if x.data.ndim != 4 or k.data.ndim != 4:
        raise ShapeError(f"conv2d: expected (B,Cin,H,W) and (Cout,Cin,K,K), got {x.shape} and {k.shape}")
    B, cin, H, W = x.shape
    cout, cin_k, K, K2 = k.shape
    if K != K2 or K % 2 == 0:
        raise ShapeError(f"conv2d: kernel must be odd and square, got {K}x{K2}")
    if cin != cin_k:
        raise ShapeError(f"conv2d: input channels {cin} != kernel channels {cin_k}")

    P = K // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (P, P), (P, P)))
    Ho = (H + 2 * P - K) // stride + 1
    Wo = (W + 2 * P - K) // stride + 1
    out = np.zeros((B, cout, Ho, Wo), dtype=x.data.dtype)
    for u in range(K):
        for v in range(K):
            xs = xp[:, :, u : u + stride * Ho : stride, v : v + stride * Wo : stride]
            out += np.einsum("bchw,oc->bohw", xs, k.data[:, :, u, v], optimize=True)
    out += b.data[None, :, None, None]

    def backward(g):
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=(0, 2, 3)))
        if k.requires_grad:
            dk = np.empty_like(k.data)
            for u in range(K):
                for v in range(K):
                    xs = xp[:, :, u : u + stride * Ho : stride, v : v + stride * Wo : stride]
                    dk[:, :, u, v] = np.einsum("bohw,bchw->oc", g, xs, optimize=True)
            k.accumulate_grad(dk)
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for u in range(K):
                for v in range(K):
                    dxp[:, :, u : u + stride * Ho : stride, v : v + stride * Wo : stride] += np.einsum(
                        "bohw,oc->bchw", g, k.data[:, :, u, v], optimize=True
                    )
            x.accumulate_grad(dxp[:, :, P : P + H, P : P + W])

    return make_result(out, (x, k, b), backward)


def groupnorm(x: Tensor, gamma: Tensor, beta: Tensor, groups: int, eps: float = 1e-5) -> Tensor:
    """Per-group normalization over channels and all spatial axes, then affine."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.data.ndim < 3:
        raise ShapeError(f"groupnorm: expected at least (B,C,spatial), got {x.shape}")
    B, C = x.shape[0], x.shape[1]
    if C % groups != 0:
        raise ShapeError(f"groupnorm: groups={groups} does not divide channels={C}")
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"groupnorm: affine shapes {gamma.shape}, {beta.shape} != ({C},)")

    spatial = x.shape[2:]
    xg = x.data.reshape(B, groups, -1)
    mu = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mu) * inv_std).reshape(x.shape)

    bshape = (1, C) + (1,) * len(spatial)
    out = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)
    N = xg.shape[2]

    def backward(g):
        reduce_axes = (0,) + tuple(range(2, x.data.ndim))
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).sum(axis=reduce_axes))
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=reduce_axes))
        if x.requires_grad:
            dxhat = (g * gamma.data.reshape(bshape)).reshape(B, groups, -1)
            xh = xhat.reshape(B, groups, -1)
            s1 = dxhat.sum(axis=2, keepdims=True)
            s2 = (dxhat * xh).sum(axis=2, keepdims=True)
            dx = inv_std / N * (N * dxhat - s1 - xh * s2)
            x.accumulate_grad(dx.reshape(x.shape))

    return make_result(out, (x, gamma, beta), backward)


def film(h: Tensor, cond: Tensor) -> Tensor:
    """Feature-wise linear modulation: out[b,c,t] = cond[b,c] * h[b,c,t] + cond[b,C+c]."""
    h, cond = _as_tensor(h), _as_tensor(cond)
    if h.data.ndim != 3:
        raise ShapeError(f"film: expected (B,C,T) features, got {h.shape}")
    B, C, T = h.shape
    if cond.shape != (B, 2 * C):
        raise ShapeError(f"film: conditioning shape {cond.shape} != ({B}, {2 * C})")

    gam = cond.data[:, :C]
    bet = cond.data[:, C:]
    out = gam[:, :, None] * h.data + bet[:, :, None]

    def backward(g):
        if h.requires_grad:
            h.accumulate_grad(g * gam[:, :, None])
        if cond.requires_grad:
            dgam = (g * h.data).sum(axis=2)
            dbet = g.sum(axis=2)
            cond.accumulate_grad(np.concatenate([dgam, dbet], axis=1))

    return make_result(out, (h, cond), backward)


def mish(x: Tensor) -> Tensor:
    """x * tanh(softplus(x))."""
    x = _as_tensor(x)
    sp = np.logaddexp(0.0, x.data)
    tsp = np.tanh(sp)
    out = x.data * tsp

    def backward(g):
        if x.requires_grad:
            sig = 1.0 / (1.0 + np.exp(-x.data))
            x.accumulate_grad(g * (tsp + x.data * (1.0 - tsp * tsp) * sig))

    return make_result(out, (x,), backward)


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)

    def backward(g):
        offset = 0
        for t, n in zip(tensors, sizes):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(offset, offset + n)
                t.accumulate_grad(g[tuple(idx)])
            offset += n

    return make_result(out, tuple(tensors), backward)


def upsample_nearest1d(x: Tensor) -> Tensor:
    """Nearest-neighbor temporal upsampling by a factor of 2."""
    x = _as_tensor(x)
    if x.data.ndim != 3:
        raise ShapeError(f"upsample_nearest1d: expected (B,C,T), got {x.shape}")
    out = np.repeat(x.data, 2, axis=2)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g[:, :, 0::2] + g[:, :, 1::2])

    return make_result(out, (x,), backward)


def mean_axes(x: Tensor, axes) -> Tensor:
    """Mean over the given axes (keeps remaining axes)."""
    x = _as_tensor(x)
    axes = tuple(axes)
    out = x.data.mean(axis=axes)
    n = 1
    for a in axes:
        n *= x.shape[a]

    def backward(g):
        if x.requires_grad:
            gg = np.expand_dims(g, axes)
            x.accumulate_grad(np.broadcast_to(gg, x.shape).astype(x.data.dtype) / n)

    return make_result(out, (x,), backward)


def mean(x: Tensor) -> Tensor:
    """Mean over all elements; returns a scalar tensor."""
    x = _as_tensor(x)
    out = np.asarray(x.data.mean(), dtype=x.data.dtype)
    n = x.data.size

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.full(x.shape, float(g) / n, dtype=x.data.dtype))

    return make_result(out, (x,), backward)


def mse(pred: Tensor, target) -> Tensor:
    """Mean squared error over all coordinates."""
    d = sub(pred, _as_tensor(target))
    return mean(mul(d, d))


def reshape(x: Tensor, shape) -> Tensor:
    x = _as_tensor(x)
    shape = tuple(shape)
    out = x.data.reshape(shape)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.shape))

    return make_result(out, (x,), backward)
