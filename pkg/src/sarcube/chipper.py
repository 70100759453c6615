"""Cut channel stacks into chips, keep positive ones, split train/test."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cube_store import CHIP_DIMS, GeoTransform, RasterVar, create_cube, open_cube
from .errors import InvalidSpec, TooFew, TooSmall

CHIP = 128


@dataclass
class Chip:
    inputs: np.ndarray          # (C, chip, chip) float32
    mask: np.ndarray            # (chip, chip) uint8 in {0, 1}
    origin: tuple[int, int]     # (y0, x0) pixel offsets in the source raster
    split: str | None = None    # "train" / "test" once assigned

    @property
    def positives(self) -> int:
        return int(np.count_nonzero(self.mask == 1))


def tile_grid(shape, chip=CHIP) -> list[tuple[int, int]]:
    """Non-overlapping chip origins; partial tiles at the far edges are dropped."""
    ny, nx = shape
    if ny < chip or nx < chip:
        raise TooSmall(f"raster {shape} smaller than one {chip}x{chip} chip")
    return [(y, x) for y in range(0, ny - chip + 1, chip) for x in range(0, nx - chip + 1, chip)]


def extract_chips(inputs, mask, origins, chip=CHIP) -> list[Chip]:
    inputs = np.asarray(inputs)
    mask = np.asarray(mask)
    out = []
    for y, x in origins:
        m = mask[y:y + chip, x:x + chip]
        # nodata (255) counts as negative inside a chip
        m = np.where(m == 1, 1, 0).astype(np.uint8)
        out.append(Chip(np.ascontiguousarray(inputs[:, y:y + chip, x:x + chip], dtype=np.float32),
                        m, (int(y), int(x))))
    return out


def filter_positive(chips) -> list[Chip]:
    return [c for c in chips if c.positives >= 1]


def split_chips(chips, test_fraction: float, seed: int) -> list[str]:
    """Seeded shuffle; the first ceil(N * test_fraction) chips go to test.

    Returns the split label per chip (in input order) and stores it on the
    chips as well.
    """
    n = len(chips)
    if n < 2:
        raise TooFew(f"need at least 2 chips to split, got {n}")
    if not 0 < test_fraction < 1:
        raise InvalidSpec(f"test_fraction must be in (0, 1), got {test_fraction}")
    # round away float noise so 277 * (61/277) gives 61, not 62
    n_test = math.ceil(round(n * test_fraction, 9))
    n_test = min(max(n_test, 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    labels = ["train"] * n
    for i in order[:n_test]:
        labels[i] = "test"
    for c, lab in zip(chips, labels):
        c.split = lab
    return labels


def save_chips(out_dir, chips, channels, geotransform: GeoTransform | None = None,
               extra: dict | None = None) -> Path:
    """Write chips as a cube-format directory with ``inputs`` and ``mask``
    variables plus ``index.json`` listing origins and split labels."""
    out_dir = Path(out_dir)
    if not chips:
        raise TooFew("no chips to save")
    n, (c, h, w) = len(chips), chips[0].inputs.shape
    cube = create_cube(out_dir, [("chip", n), ("channel", c), ("y", h), ("x", w)],
                       geotransform, dim_order=CHIP_DIMS)
    cube.write_var(RasterVar("inputs", ("chip", "channel", "y", "x"),
                             np.stack([ch.inputs for ch in chips]).astype(np.float32),
                             (1, c, h, w)))
    cube.write_var(RasterVar("mask", ("chip", "y", "x"),
                             np.stack([ch.mask for ch in chips]).astype(np.uint8), (1, h, w)))
    index = {"channels": list(channels),
             "origins": [list(ch.origin) for ch in chips],
             "splits": [ch.split for ch in chips]}
    index.update(extra or {})
    (out_dir / "index.json").write_text(json.dumps(index, indent=2))
    return out_dir


def load_chips(path) -> tuple[list[Chip], dict]:
    path = Path(path)
    cube = open_cube(path)
    index = json.loads((path / "index.json").read_text())
    inputs = cube.read_var("inputs")
    masks = cube.read_var("mask")
    splits = index.get("splits") or [None] * len(inputs)
    chips = [Chip(inputs[i], masks[i], tuple(index["origins"][i]), splits[i])
             for i in range(len(inputs))]
    return chips, index
