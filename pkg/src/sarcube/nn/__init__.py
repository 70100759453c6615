"""Minimal tensor/autograd engine for training the segmentation network."""

from .tensor import Tensor
from .functional import (
    concat_channels,
    conv2d,
    cross_entropy,
    group_norm,
    max_pool2,
    relu,
    softmax,
    upsample2,
)
from .layers import Conv2d, GroupNorm, Module
from .optim import Adam, AdamState, PlateauSchedule, adam_step, lr_plateau_step
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import check_gradients, rel_error

__all__ = [
    "Tensor", "conv2d", "relu", "max_pool2", "upsample2", "concat_channels",
    "group_norm", "cross_entropy", "softmax", "Module", "Conv2d", "GroupNorm",
    "Adam", "AdamState", "PlateauSchedule", "adam_step", "lr_plateau_step",
    "save_checkpoint", "load_checkpoint", "check_gradients", "rel_error",
]
