"""Differentiable operations used by the segmentation network."""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import InvalidLabel, ShapeError
from .tensor import Tensor, make_result


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2-D cross-correlation with zero padding.

    x: (N, Cin, H, W); weight: (Cout, Cin, kh, kw); bias: (Cout,) or None.
    Output spatial size is (H + 2p - kh) // stride + 1.
    """
    x, weight = _as_tensor(x), _as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input and weight, got {x.shape} and {weight.shape}")
    n, cin, h, w = x.shape
    cout, wcin, kh, kw = weight.shape
    if wcin != cin:
        raise ShapeError(f"input has {cin} channels, weight expects {wcin}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"invalid stride {stride} / padding {padding}")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {h}x{w} (p={padding})")
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.shape != (cout,):
            raise ShapeError(f"bias shape {bias.shape} != ({cout},)")

    xp = x.data
    if padding:
        xp = np.pad(xp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (xp.shape[2] - kh) // stride + 1
    ow = (xp.shape[3] - kw) // stride + 1
    cols = kernels.im2col(xp, kh, kw, stride)
    wmat = weight.data.reshape(cout, cin * kh * kw)
    out = np.matmul(wmat, cols).reshape(n, cout, oh, ow)
    if bias is not None:
        out += bias.data[None, :, None, None]
    padded_shape = xp.shape

    def backward(g):
        gmat = g.reshape(n, cout, oh * ow)
        if weight.requires_grad:
            gw = np.zeros_like(wmat)
            for i in range(n):
                gw += gmat[i] @ cols[i].T
            weight.accumulate(gw.reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            bias.accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gcols = np.matmul(wmat.T, gmat)
            gx = kernels.col2im(gcols, padded_shape, kh, kw, stride)
            if padding:
                gx = gx[:, :, padding:-padding, padding:-padding]
            x.accumulate(gx)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, parents, backward)


def relu(x):
    x = _as_tensor(x)
    mask = x.data > 0
    # maximum keeps NaN so divergence surfaces in the loss
    out = np.maximum(x.data, 0).astype(x.dtype, copy=False)

    def backward(g):
        x.accumulate(g * mask)

    return make_result(out, (x,), backward)


def max_pool2(x):
    """2x2 max pool with stride 2; odd trailing rows/columns are dropped."""
    x = _as_tensor(x)
    if x.ndim != 4 or x.shape[2] < 2 or x.shape[3] < 2:
        raise ShapeError(f"max_pool2 needs (N, C, H>=2, W>=2), got {x.shape}")
    out, idx = kernels.maxpool2_forward(x.data)
    shape = x.shape

    def backward(g):
        x.accumulate(kernels.maxpool2_backward(g, idx, shape))

    return make_result(out, (x,), backward)


def upsample2(x):
    """Nearest-neighbour 2x upsampling of the two trailing axes."""
    x = _as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"upsample2 needs a 4-d input, got {x.shape}")
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)

    def backward(g):
        x.accumulate(kernels.upsample2_backward(g))

    return make_result(out, (x,), backward)


def concat_channels(*xs):
    xs = [_as_tensor(x) for x in xs]
    if any(x.ndim != 4 for x in xs):
        raise ShapeError("concat_channels needs 4-d inputs")
    ref = xs[0].shape
    for x in xs[1:]:
        if x.shape[0] != ref[0] or x.shape[2:] != ref[2:]:
            raise ShapeError(f"cannot concatenate {ref} with {x.shape}")
    out = np.concatenate([x.data for x in xs], axis=1)
    bounds = np.cumsum([0] + [x.shape[1] for x in xs])

    def backward(g):
        for x, a, b in zip(xs, bounds[:-1], bounds[1:]):
            if x.requires_grad:
                x.accumulate(g[:, a:b])

    return make_result(out, tuple(xs), backward)


def group_norm(x, gamma, beta, eps=1e-5):
    """Single-group normalisation: per sample over (C, H, W), then a
    per-channel affine transform."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.ndim != 4:
        raise ShapeError(f"group_norm needs a 4-d input, got {x.shape}")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"affine params must have shape ({c},)")
    axes = (1, 2, 3)
    mu = x.data.mean(axis=axes, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]

    def backward(g):
        if gamma.requires_grad:
            gamma.accumulate((g * xhat).sum(axis=(0, 2, 3)))
        if beta.requires_grad:
            beta.accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gh = g * gamma.data[None, :, None, None]
            gx = inv * (gh - gh.mean(axis=axes, keepdims=True)
                        - xhat * (gh * xhat).mean(axis=axes, keepdims=True))
            x.accumulate(gx)

    return make_result(out.astype(x.dtype, copy=False), (x, gamma, beta), backward)


def log_softmax(logits, axis=1):
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def softmax(logits, axis=1):
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def cross_entropy(logits, target):
    """Mean over pixels of -log softmax(logits)[target].

    logits: (N, K, H, W); target: integer (N, H, W) with values in [0, K).
    """
    logits = _as_tensor(logits)
    target = np.asarray(target)
    if logits.ndim != 4:
        raise ShapeError(f"logits must be (N, K, H, W), got {logits.shape}")
    n, k, h, w = logits.shape
    if target.shape != (n, h, w):
        raise ShapeError(f"target shape {target.shape} != {(n, h, w)}")
    if target.dtype.kind == "f":
        if not np.all(target == np.round(target)):
            raise InvalidLabel("target must hold integer class labels")
    if target.size and (target.min() < 0 or target.max() >= k):
        raise InvalidLabel(f"target labels must lie in [0, {k}), got {np.unique(target)[:5]}")
    target = target.astype(np.intp)
    logp = log_softmax(logits.data, axis=1)
    picked = np.take_along_axis(logp, target[:, None], axis=1)
    count = n * h * w
    loss = -picked.sum(dtype=np.float64) / count
    out = np.asarray(loss, dtype=logits.dtype)

    def backward(g):
        grad = np.exp(logp)
        np.put_along_axis(grad, target[:, None],
                          np.take_along_axis(grad, target[:, None], axis=1) - 1, axis=1)
        logits.accumulate(grad * (np.asarray(g, dtype=logits.dtype) / count))

    return make_result(out, (logits,), backward)
