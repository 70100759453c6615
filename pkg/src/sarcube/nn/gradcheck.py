"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def rel_error(analytic, numeric):
    """Max-norm relative error ``|a - n|_inf / max(|a|_inf, |n|_inf)``."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.abs(analytic - numeric).max() / scale)


def numeric_grad(f, arrays, index, h):
    """Central differences of scalar ``f(arrays)`` w.r.t. ``arrays[index]``."""
    x = arrays[index]
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(arrays)
        flat[i] = orig - h
        down = f(arrays)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return grad


def check_gradients(fn, arrays, h=1e-5, seed=0):
    """Compare backprop against finite differences for every input.

    ``fn`` maps Tensors to a Tensor. Non-scalar outputs are reduced with a
    fixed random projection so every output element contributes. Returns
    the relative error per input.
    """
    arrays = [np.array(a, copy=True) for a in arrays]
    probe = fn(*[Tensor(a) for a in arrays]).data
    proj = np.random.default_rng(seed).standard_normal(probe.shape).astype(probe.dtype)

    def scalar(arrs):
        out = fn(*[Tensor(a) for a in arrs]).data
        return float((out * proj).sum(dtype=np.float64))

    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = fn(*tensors)
    out.backward(proj if out.data.shape else np.asarray(proj, dtype=out.dtype))
    errors = []
    for i, t in enumerate(tensors):
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numeric_grad(scalar, arrays, i, h)
        errors.append(rel_error(analytic, numeric))
    return errors
