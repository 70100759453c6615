"""Encoder-decoder segmentation network, training loop and inference."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .errors import DivergedError, InvalidSpec, ShapeError
from .nn import functional as F

log = logging.getLogger(__name__)

CHIP_SIZE = 128


@dataclass
class ModelConfig:
    in_channels: int
    base_width: int = 16
    depth: int = 4
    out_classes: int = 2

    def validate(self):
        if self.in_channels < 1:
            raise InvalidSpec(f"in_channels must be >= 1, got {self.in_channels}")
        if self.base_width < 1:
            raise InvalidSpec(f"base_width must be >= 1, got {self.base_width}")
        if self.depth < 1:
            raise InvalidSpec(f"depth must be >= 1, got {self.depth}")
        if CHIP_SIZE % (2 ** self.depth):
            raise InvalidSpec(f"{CHIP_SIZE} is not divisible by 2**{self.depth}")
        if self.out_classes < 2:
            raise InvalidSpec("need at least two output classes")
        return self


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 8
    lr0: float = 0.01
    weight_decay: float = 1e-4
    seed: int = 0
    deterministic: bool = True
    plateau_factor: float = 0.1
    plateau_patience: int = 10
    plateau_threshold: float = 1e-4
    time_limit: float | None = None  # seconds; None = unlimited

    def validate(self):
        if self.epochs < 1:
            raise InvalidSpec(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise InvalidSpec(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr0 >= 0:
            raise InvalidSpec(f"lr0 must be >= 0, got {self.lr0}")
        return self


class ConvBlock(nn.Module):
    """conv3x3 -> GN -> ReLU -> conv3x3 -> GN -> ReLU"""

    def __init__(self, in_ch, out_ch, rng, dtype):
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, rng=rng, dtype=dtype)
        self.norm1 = nn.GroupNorm(out_ch, dtype=dtype)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, rng=rng, dtype=dtype)
        self.norm2 = nn.GroupNorm(out_ch, dtype=dtype)

    def forward(self, x):
        x = F.relu(self.norm1(self.conv1(x)))
        return F.relu(self.norm2(self.conv2(x)))


class UNet(nn.Module):
    """U-Net with ``depth`` pooling stages.

    Encoder stage i has width ``base * 2**i``. The bottleneck keeps the
    deepest encoder width; each decoder stage concatenates the upsampled
    features with the matching skip and convolves down to the next
    shallower width, so decoder input and skip widths always match.
    """

    def __init__(self, cfg: ModelConfig, seed=0, dtype=np.float32):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        widths = [cfg.base_width * 2 ** i for i in range(cfg.depth)]
        self.down = []
        prev = cfg.in_channels
        for w in widths:
            self.down.append(ConvBlock(prev, w, rng, dtype))
            prev = w
        self.bottleneck = ConvBlock(prev, prev, rng, dtype)
        self.up = []
        for i in reversed(range(cfg.depth)):
            out = widths[i - 1] if i > 0 else widths[0]
            self.up.append(ConvBlock(prev + widths[i], out, rng, dtype))
            prev = out
        self.head = nn.Conv2d(prev, cfg.out_classes, 1, padding=0, zero_init=True, dtype=dtype)

    def forward(self, x):
        if not isinstance(x, nn.Tensor):
            x = nn.Tensor(x)
        if x.ndim != 4 or x.shape[1] != self.cfg.in_channels:
            raise ShapeError(f"expected (N, {self.cfg.in_channels}, H, W), got {x.shape}")
        k = 2 ** self.cfg.depth
        if x.shape[2] % k or x.shape[3] % k:
            raise ShapeError(f"spatial size {x.shape[2:]} not divisible by {k}")
        skips = []
        for block in self.down:
            x = block(x)
            skips.append(x)
            x = F.max_pool2(x)
        x = self.bottleneck(x)
        for block, skip in zip(self.up, reversed(skips)):
            x = block(F.concat_channels(F.upsample2(x), skip))
        return self.head(x)


def build_model(cfg: ModelConfig, seed=0, dtype=np.float32) -> UNet:
    model = UNet(cfg, seed=seed, dtype=dtype)
    log.info("built UNet in=%d width=%d depth=%d with %d parameters",
             cfg.in_channels, cfg.base_width, cfg.depth, model.num_parameters())
    return model


@dataclass
class EpochLog:
    epoch: int
    loss: float
    lr: float
    seconds: float


@dataclass
class TrainResult:
    history: list = field(default_factory=list)
    checkpoint: Path | None = None
    timed_out: bool = False

    @property
    def final_loss(self):
        return self.history[-1].loss if self.history else math.nan


def _stack_chips(chips):
    if isinstance(chips, tuple) and len(chips) == 2:
        x, y = chips
        return np.asarray(x, dtype=np.float32), np.asarray(y)
    xs = np.stack([c.inputs for c in chips]).astype(np.float32, copy=False)
    ys = np.stack([c.mask for c in chips])
    return xs, ys


def train(model: UNet, train_chips, tcfg: TrainConfig, checkpoint=None, stats=None,
          on_epoch=None) -> TrainResult:
    """Fit ``model`` on chips with Adam + reduce-on-plateau (monitoring train loss).

    ``train_chips`` is a list of Chip objects or an ``(inputs, masks)`` pair of
    arrays shaped (N, C, H, W) and (N, H, W). When ``checkpoint`` is given the
    model, optimizer and schedule state are written after every epoch.
    """
    tcfg.validate()
    x_all, y_all = _stack_chips(train_chips)
    n = len(x_all)
    if n < 1:
        raise InvalidSpec("need at least one training chip")
    x_all = x_all.astype(model.head.weight.dtype, copy=False)
    opt = nn.Adam(model.parameters(), lr=tcfg.lr0, weight_decay=tcfg.weight_decay)
    sched = nn.PlateauSchedule(lr=tcfg.lr0, factor=tcfg.plateau_factor,
                               patience=tcfg.plateau_patience, threshold=tcfg.plateau_threshold)
    rng = np.random.default_rng(tcfg.seed if tcfg.deterministic else None)
    result = TrainResult()
    start = time.perf_counter()
    for epoch in range(1, tcfg.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        total = 0.0
        for b in range(0, n, tcfg.batch_size):
            idx = order[b:b + tcfg.batch_size]
            loss = F.cross_entropy(model(x_all[idx]), y_all[idx])
            value = float(loss.data)
            if not math.isfinite(value):
                raise DivergedError(f"non-finite loss at epoch {epoch}", result.checkpoint)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += value * len(idx)
        epoch_loss = total / n
        lr_used = opt.lr
        sched.step(epoch_loss)
        opt.lr = sched.lr
        entry = EpochLog(epoch, epoch_loss, lr_used, time.perf_counter() - t0)
        result.history.append(entry)
        log.info("epoch %d loss %.5f lr %.2g (%.1fs)", epoch, epoch_loss, lr_used, entry.seconds)
        if checkpoint is not None:
            result.checkpoint = save_model(checkpoint, model, opt, sched, stats, result.history, tcfg)
        if on_epoch is not None:
            on_epoch(entry)
        if tcfg.time_limit is not None and time.perf_counter() - start > tcfg.time_limit:
            result.timed_out = True
            break
    return result


def predict(model: UNet, inputs) -> np.ndarray:
    """Landslide-class probability for one (C, H, W) chip."""
    inputs = np.asarray(inputs)
    if inputs.ndim != 3:
        raise ShapeError(f"predict expects (C, H, W), got {inputs.shape}")
    return predict_batch(model, inputs[None])[0]


def predict_batch(model: UNet, inputs, batch_size=8) -> np.ndarray:
    inputs = np.asarray(inputs)
    if inputs.ndim != 4 or inputs.shape[1] != model.cfg.in_channels:
        raise ShapeError(f"expected (N, {model.cfg.in_channels}, H, W), got {inputs.shape}")
    dtype = model.head.weight.dtype
    out = []
    for b in range(0, len(inputs), batch_size):
        logits = model(inputs[b:b + batch_size].astype(dtype, copy=False)).data
        out.append(F.softmax(logits, axis=1)[:, 1])
    return np.concatenate(out).astype(np.float32)


def save_model(path, model: UNet, opt=None, sched=None, stats=None, history=None, tcfg=None):
    tensors = {f"model/{k}": v for k, v in model.state_dict().items()}
    meta = {"model_config": asdict(model.cfg)}
    if opt is not None:
        st = opt.state
        for i, (m, v) in enumerate(zip(st.m, st.v)):
            tensors[f"adam/m/{i}"] = m
            tensors[f"adam/v/{i}"] = v
        meta["adam"] = {"lr": st.lr, "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps,
                        "weight_decay": st.weight_decay, "t": st.t}
    if sched is not None:
        meta["plateau"] = asdict(sched)
        if math.isinf(sched.best):
            meta["plateau"]["best"] = None
    if stats is not None:
        meta["channel_stats"] = stats.to_dict()
    if history:
        meta["history"] = [asdict(h) for h in history]
    if tcfg is not None:
        meta["train_config"] = asdict(tcfg)
    return nn.save_checkpoint(path, tensors, meta)


def load_model(path):
    """Return ``(model, meta)``; meta holds configs, optimizer scalars and stats."""
    tensors, meta = nn.load_checkpoint(path)
    cfg = ModelConfig(**meta["model_config"])
    state = {k[len("model/"):]: v for k, v in tensors.items() if k.startswith("model/")}
    dtype = next(iter(state.values())).dtype
    model = UNet(cfg, dtype=dtype)
    model.load_state_dict(state)
    meta["adam_moments"] = {k: v for k, v in tensors.items() if k.startswith("adam/")}
    return model, meta
