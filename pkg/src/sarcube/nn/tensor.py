"""Tensor with reverse-mode gradient tracking."""

from __future__ import annotations

import numpy as np


class Tensor:
    """An array plus the bookkeeping needed to backpropagate into it.

    Gradients accumulate into ``grad`` (same shape and dtype as ``data``).
    Computation runs in the dtype of the inputs: float32 for training,
    float64 for gradient verification.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def zero_grad(self):
        self.grad = None

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        """Backpropagate from this tensor into every tracked ancestor."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("grad must be given for non-scalar tensors")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        self.accumulate(grad)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            node._backward(node.grad)
            if node._parents:
                # interior gradients are not needed once propagated
                node.grad = None
                node._backward = None
                node._parents = ()

    def detach(self):
        return Tensor(self.data)


def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def make_result(data, parents, backward):
    """Wrap an op output; tracks gradients only if some parent does."""
    tracked = tuple(p for p in parents if p.requires_grad)
    if not tracked:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=tracked, _backward=backward)
