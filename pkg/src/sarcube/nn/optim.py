"""Adam with L2-coupled weight decay and a reduce-on-plateau LR schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(state: AdamState, params, grads):
    """One Adam update, in place on ``params`` (numpy arrays).

    Decay is folded into the gradient (g + wd * theta) before the moment
    updates, as in classic L2-regularised Adam.
    """
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(state.m) != len(params):
        raise ValueError(f"optimizer tracks {len(state.m)} params, got {len(params)}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"param shape {p.shape} != grad shape {g.shape}")
        if state.weight_decay:
            g = g + state.weight_decay * p
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        denom = np.sqrt(v / c2) + state.eps
        p -= (state.lr * (m / c1) / denom).astype(p.dtype, copy=False)
    return params


class Adam:
    """Binds an :class:`AdamState` to a list of Tensors."""

    def __init__(self, params, lr=0.01, weight_decay=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps,
                               weight_decay=weight_decay)

    @property
    def lr(self):
        return self.state.lr

    @lr.setter
    def lr(self, value):
        self.state.lr = value

    def step(self):
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        adam_step(self.state, [p.data for p in self.params], grads)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


@dataclass
class PlateauSchedule:
    """Reduce the learning rate when a monitored loss stops improving.

    Relative threshold mode: a loss counts as an improvement only when it is
    strictly below ``best * (1 - threshold)``.
    """

    lr: float = 0.01
    factor: float = 0.1
    patience: int = 10
    threshold: float = 1e-4
    min_lr: float = 0.0
    eps: float = 1e-8
    best: float = math.inf
    bad_epochs: int = 0
    epoch: int = 0

    def step(self, epoch_loss: float) -> float:
        lr_plateau_step(self, epoch_loss)
        return self.lr


def lr_plateau_step(sched: PlateauSchedule, epoch_loss: float) -> PlateauSchedule:
    if not math.isfinite(epoch_loss):
        raise ValueError(f"epoch loss must be finite, got {epoch_loss}")
    sched.epoch += 1
    if epoch_loss < sched.best * (1.0 - sched.threshold):
        sched.best = epoch_loss
        sched.bad_epochs = 0
    else:
        sched.bad_epochs += 1
    if sched.bad_epochs > sched.patience:
        new_lr = max(sched.lr * sched.factor, sched.min_lr)
        # skip reductions too small to matter
        if sched.lr - new_lr > sched.eps:
            sched.lr = new_lr
        sched.bad_epochs = 0
    return sched
