"""Turn raw cube variables into standardized model input channels."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import InvalidSpec, NotFound

LOG_FLOOR = 1e-6
STD_EPS = 1e-6

SAR_CHANNELS = ("VV_pre", "VH_pre", "VV_post", "VH_post")
DEM_CHANNELS = ("elevation", "aspect", "slope", "curvature")
ALL_CHANNELS = SAR_CHANNELS + DEM_CHANNELS

# channel name -> cube variable holding it
CHANNEL_VARS = {
    "VV_pre": "vv", "VV_post": "vv", "VH_pre": "vh", "VH_post": "vh",
    "elevation": "dem", "aspect": "aspect", "slope": "slope", "curvature": "curvature",
}


class ChannelSet(str, Enum):
    VV_only = "VV_only"
    VH_only = "VH_only"
    VV_VH = "VV_VH"
    SAR_DEM = "SAR_DEM"
    DEM_only = "DEM_only"

    @property
    def channels(self) -> tuple[str, ...]:
        return {
            "VV_only": ("VV_pre", "VV_post"),
            "VH_only": ("VH_pre", "VH_post"),
            "VV_VH": SAR_CHANNELS,
            "SAR_DEM": ALL_CHANNELS,
            "DEM_only": DEM_CHANNELS,
        }[self.value]

    @property
    def uses_sar(self) -> bool:
        return self is not ChannelSet.DEM_only

    @classmethod
    def parse(cls, text) -> "ChannelSet":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_").replace("+", "_")
        aliases = {
            "vv": cls.VV_only, "vv_only": cls.VV_only,
            "vh": cls.VH_only, "vh_only": cls.VH_only,
            "vvvh": cls.VV_VH, "vv_vh": cls.VV_VH, "sar": cls.VV_VH,
            "sardem": cls.SAR_DEM, "sar_dem": cls.SAR_DEM,
            "dem": cls.DEM_only, "dem_only": cls.DEM_only,
        }
        if key not in aliases:
            raise InvalidSpec(f"unknown channel set {text!r}")
        return aliases[key]


@dataclass
class InputConfig:
    channel_set: ChannelSet
    k_timesteps: int
    pre_indices: tuple[int, ...]
    post_indices: tuple[int, ...]

    def __post_init__(self):
        self.channel_set = ChannelSet.parse(self.channel_set)
        self.pre_indices = tuple(int(i) for i in self.pre_indices)
        self.post_indices = tuple(int(i) for i in self.post_indices)
        if not 1 <= self.k_timesteps <= 4:
            raise InvalidSpec(f"k_timesteps must be in 1..4, got {self.k_timesteps}")
        if len(self.pre_indices) != self.k_timesteps or len(self.post_indices) != self.k_timesteps:
            raise InvalidSpec(
                f"need {self.k_timesteps} pre and post indices, got "
                f"{len(self.pre_indices)} and {len(self.post_indices)}")

    @property
    def channels(self) -> tuple[str, ...]:
        return self.channel_set.channels

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @classmethod
    def around_event(cls, channel_set, k, event_index, n_timesteps=None) -> "InputConfig":
        """Last ``k`` timesteps before ``event_index`` and first ``k`` from it on."""
        pre = tuple(range(event_index - k, event_index))
        post = tuple(range(event_index, event_index + k))
        if pre[0] < 0 or (n_timesteps is not None and post[-1] >= n_timesteps):
            raise InvalidSpec(
                f"k={k} needs timesteps {pre[0]}..{post[-1]}, cube has "
                f"{n_timesteps} with event at {event_index}")
        return cls(channel_set, k, pre, post)

    @classmethod
    def for_cube(cls, cube, channel_set, k) -> "InputConfig":
        if "event_index" not in cube.attrs:
            raise NotFound("cube attrs lack 'event_index'")
        return cls.around_event(channel_set, k, int(cube.attrs["event_index"]),
                                cube.dims.get("timestep"))


@dataclass
class ChannelStats:
    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    computed_over: str = "train-chip pixels"

    def __post_init__(self):
        self.names = tuple(self.names)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if not len(self.names) == len(self.mean) == len(self.std):
            raise InvalidSpec("stats count does not match channel count")
        if np.any(self.std < STD_EPS):
            raise InvalidSpec(f"std below {STD_EPS}: {self.std}")

    @classmethod
    def from_data(cls, names, data, computed_over="train-chip pixels") -> "ChannelStats":
        """Per-channel stats of ``data`` shaped (..., C, H, W) with C on axis -3."""
        data = np.asarray(data, dtype=np.float64)
        flat = np.moveaxis(data, -3, 0).reshape(data.shape[-3], -1)
        mean = flat.mean(axis=1)
        std = np.maximum(flat.std(axis=1), STD_EPS)
        return cls(names, mean, std, computed_over)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "mean": self.mean.tolist(),
                "std": self.std.tolist(), "computed_over": self.computed_over}

    @classmethod
    def from_dict(cls, d) -> "ChannelStats":
        return cls(d["names"], d["mean"], d["std"], d.get("computed_over", "train-chip pixels"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "ChannelStats":
        return cls.from_dict(json.loads(Path(path).read_text()))


def log_stabilize(x):
    """Natural log of linear power, clamped at 1e-6 before the log."""
    x = np.asarray(x)
    return np.log(np.maximum(x, LOG_FLOOR)).astype(np.result_type(x.dtype, np.float32))


def temporal_mean(stack):
    """Pixel-wise arithmetic mean over the leading (time) axis."""
    if isinstance(stack, np.ndarray):
        arrays = list(stack) if stack.ndim >= 1 else []
    else:
        arrays = [np.asarray(s) for s in stack]
    if not arrays:
        raise InvalidSpec("temporal_mean needs at least one timestep")
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise InvalidSpec("all timesteps must have the same shape")
    acc = np.zeros(shape, dtype=np.float64)
    for a in arrays:
        acc += a
    return (acc / len(arrays)).astype(np.result_type(arrays[0].dtype, np.float32))


def standardize(x, stats: ChannelStats | None = None, mean=None, std=None):
    """(x - mean) / std; with ``stats``, x is (C, H, W) or (N, C, H, W)."""
    x = np.asarray(x)
    if stats is not None:
        shape = (-1, 1, 1)
        return ((x - stats.mean.reshape(shape)) / stats.std.reshape(shape)).astype(np.float32)
    return ((x - mean) / std).astype(np.float32)


def _sar_channel(cube, var, indices, window=None):
    if var not in cube:
        raise NotFound(f"cube has no variable {var!r}")
    n = cube.dims.get("timestep", 0)
    for i in indices:
        if not 0 <= i < n:
            raise NotFound(f"timestep {i} not in cube (has {n})")
    stack = []
    for i in indices:
        win = {"timestep": (i, i + 1)}
        if window:
            win.update(window)
        stack.append(log_stabilize(cube.read_var(var, win)[0]))
    return temporal_mean(stack)


def raw_channels(cube, config: InputConfig, window=None) -> np.ndarray:
    """Unstandardised channel stack (C, y, x) in canonical channel order.

    SAR channels are log-stabilised then averaged over the configured
    timesteps; DEM channels are passed through as stored.
    """
    out = []
    for name in config.channels:
        var = CHANNEL_VARS[name]
        if name in SAR_CHANNELS:
            idx = config.pre_indices if name.endswith("_pre") else config.post_indices
            out.append(_sar_channel(cube, var, idx, window))
        else:
            if var not in cube:
                raise NotFound(f"cube has no variable {var!r} for channel {name}")
            out.append(cube.read_var(var, window).astype(np.float32))
    return np.stack(out).astype(np.float32)


def assemble_inputs(cube, config: InputConfig, stats: ChannelStats) -> np.ndarray:
    raw = raw_channels(cube, config)
    if tuple(stats.names) != config.channels:
        raise InvalidSpec(f"stats cover {stats.names}, config needs {config.channels}")
    return standardize(raw, stats)
