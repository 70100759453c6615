"""Parameterised layers and a tiny module container."""

from __future__ import annotations

import numpy as np

from . import functional as F
from .tensor import Tensor


class Module:
    """Base class; subclasses assign Tensors and Modules as attributes."""

    def named_parameters(self, prefix=""):
        for key, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_parameters(prefix + key + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def num_parameters(self):
        return sum(p.data.size for p in self.parameters())

    def state_dict(self):
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        unexpected = set(state) - set(params)
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, p in params.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ValueError(f"{name}: shape {arr.shape} != {p.shape}")
            p.data = arr.astype(p.dtype, copy=True)

    def astype(self, dtype):
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Conv2d(Module):
    """3x3 (or k x k) convolution, Kaiming-uniform fan-in init, zero bias."""

    def __init__(self, in_ch, out_ch, kernel_size=3, padding=None, stride=1,
                 rng=None, zero_init=False, dtype=np.float32):
        if padding is None:
            padding = kernel_size // 2
        self.padding = padding
        self.stride = stride
        shape = (out_ch, in_ch, kernel_size, kernel_size)
        if zero_init:
            w = np.zeros(shape, dtype=dtype)
        else:
            rng = rng if rng is not None else np.random.default_rng()
            fan_in = in_ch * kernel_size * kernel_size
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=shape).astype(dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True)

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class GroupNorm(Module):
    def __init__(self, channels, eps=1e-5, dtype=np.float32):
        self.eps = eps
        self.weight = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)

    def forward(self, x):
        return F.group_norm(x, self.weight, self.bias, self.eps)
