"""Chunked multi-variable raster cubes stored in a Zarr v2 subset.

Layout of a cube directory::

    .zgroup                 {"zarr_format": 2}
    .zattrs                 cube dims, dim order, geotransform, user attrs
    <var>/.zarray           shape, chunks, dtype, order, compressor, fill_value
    <var>/.zattrs           {"_ARRAY_DIMENSIONS": [...]}
    <var>/0.0.0 ...         raw little-endian C-order chunks, edge chunks padded

Only uncompressed ``<f4`` and ``|u1`` arrays are supported. Complex data is
stored as two f32 variables with ``_re`` / ``_im`` suffixes.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AlreadyExists, DimMismatch, InvalidSpec, NotFound, OutOfBounds

CUBE_DIMS = ("timepair", "timestep", "y", "x")
CHIP_DIMS = ("chip", "channel", "y", "x")

_DTYPES = {"<f4": np.dtype("<f4"), "|u1": np.dtype("|u1")}
_FILL = {"<f4": 0.0, "|u1": 255}
MASK_VALUES = (0, 1, 255)


@dataclass(frozen=True)
class GeoTransform:
    origin_x: float = 0.0
    origin_y: float = 0.0
    pixel_w: float = 1.0
    pixel_h: float = -1.0

    def __post_init__(self):
        if not self.pixel_w > 0:
            raise InvalidSpec(f"pixel_w must be positive, got {self.pixel_w}")
        if self.pixel_h == 0 or not math.isfinite(self.pixel_h):
            raise InvalidSpec(f"pixel_h must be non-zero, got {self.pixel_h}")

    def to_string(self) -> str:
        # GDAL coefficient order, no rotation terms
        vals = (self.origin_x, self.pixel_w, 0.0, self.origin_y, 0.0, self.pixel_h)
        return " ".join(repr(float(v)) for v in vals)

    @classmethod
    def from_string(cls, text: str) -> "GeoTransform":
        parts = [float(p) for p in text.replace(",", " ").split()]
        if len(parts) != 6:
            raise InvalidSpec(f"geotransform needs six numbers, got {text!r}")
        if parts[2] != 0 or parts[4] != 0:
            raise InvalidSpec("rotated geotransforms are not supported")
        return cls(parts[0], parts[3], parts[1], parts[5])

    def pixel_centers(self, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        """Map-unit coordinates of pixel centers as (row_y, col_x) vectors."""
        ny, nx = shape
        ys = self.origin_y + (np.arange(ny) + 0.5) * self.pixel_h
        xs = self.origin_x + (np.arange(nx) + 0.5) * self.pixel_w
        return ys, xs


@dataclass
class RasterVar:
    """A named dense array with dimension names and a chunk layout.

    ``chunks`` defaults to whole spatial planes with length-1 chunks along
    the leading (time / chip) dimensions.
    """

    name: str
    dims: tuple[str, ...]
    data: np.ndarray
    chunks: tuple[int, ...] | None = None

    def __post_init__(self):
        self.dims = tuple(self.dims)
        self.data = np.asarray(self.data)
        if self.data.ndim != len(self.dims):
            raise DimMismatch(
                f"{self.name}: data has {self.data.ndim} dims, names {self.dims}")
        if self.chunks is None:
            self.chunks = tuple(
                n if d in ("y", "x") else 1 for d, n in zip(self.dims, self.data.shape))
        self.chunks = tuple(int(c) for c in self.chunks)

    @property
    def dtype(self) -> str:
        if self.data.dtype == np.float32:
            return "f32"
        if self.data.dtype == np.uint8:
            return "u8"
        raise InvalidSpec(f"{self.name}: unsupported dtype {self.data.dtype}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape


@dataclass(frozen=True)
class VarInfo:
    name: str
    dims: tuple[str, ...]
    shape: tuple[int, ...]
    chunks: tuple[int, ...]
    dtype: str
    fill_value: float


@dataclass
class Datacube:
    """Handle on an on-disk cube.

    Reads are safe from several threads; writers need exclusive access.
    """

    path: Path
    dims: dict[str, int]
    geotransform: GeoTransform = field(default_factory=GeoTransform)
    attrs: dict[str, str] = field(default_factory=dict)
    dim_order: tuple[str, ...] = CUBE_DIMS

    @property
    def variables(self) -> dict[str, VarInfo]:
        out = {}
        for child in sorted(self.path.iterdir()):
            if (child / ".zarray").is_file():
                out[child.name] = _read_info(child)
        return out

    def __contains__(self, name: str) -> bool:
        return (self.path / name / ".zarray").is_file()

    @property
    def shape(self) -> tuple[int, int]:
        return self.dims["y"], self.dims["x"]

    def read_var(self, name, window=None):
        return read_var(self, name, window)

    def write_var(self, var: RasterVar) -> None:
        write_var(self, var)

    def load(self, name: str) -> RasterVar:
        info = self.var_info(name)
        return RasterVar(name, info.dims, read_var(self, name), info.chunks)

    def var_info(self, name: str) -> VarInfo:
        if name not in self:
            raise NotFound(f"no variable {name!r} in {self.path}")
        return _read_info(self.path / name)

    def set_attrs(self, **attrs: str) -> None:
        self.attrs.update({k: str(v) for k, v in attrs.items()})
        _write_group_attrs(self)


def _validate_dims(dims: Sequence[tuple[str, int]] | Mapping[str, int],
                   dim_order: Sequence[str]) -> dict[str, int]:
    items = list(dims.items()) if isinstance(dims, Mapping) else [tuple(d) for d in dims]
    names = [n for n, _ in items]
    if len(set(names)) != len(names):
        raise InvalidSpec(f"duplicate dimension names {names}")
    unknown = [n for n in names if n not in dim_order]
    if unknown:
        raise InvalidSpec(f"unknown dimensions {unknown}; allowed {tuple(dim_order)}")
    if [n for n in dim_order if n in names] != names:
        raise InvalidSpec(f"dimensions {names} not in canonical order {tuple(dim_order)}")
    for req in ("y", "x"):
        if req not in names:
            raise InvalidSpec(f"cube needs a {req!r} dimension")
    out = {}
    for n, length in items:
        if int(length) != length or length < 1:
            raise InvalidSpec(f"dimension {n} must have length >= 1, got {length}")
        out[n] = int(length)
    return out


def create_cube(path, dims, geotransform: GeoTransform | None = None,
                attrs: Mapping[str, str] | None = None,
                dim_order: Sequence[str] = CUBE_DIMS) -> Datacube:
    path = Path(path)
    if path.exists() and (not path.is_dir() or any(path.iterdir())):
        raise AlreadyExists(f"{path} exists and is not empty")
    dim_order = tuple(dim_order)
    checked = _validate_dims(dims, dim_order)
    path.mkdir(parents=True, exist_ok=True)
    _write_json(path / ".zgroup", {"zarr_format": 2})
    cube = Datacube(path, checked, geotransform or GeoTransform(),
                    {k: str(v) for k, v in (attrs or {}).items()}, dim_order)
    _write_group_attrs(cube)
    return cube


def open_cube(path) -> Datacube:
    path = Path(path)
    if not (path / ".zgroup").is_file():
        raise NotFound(f"{path} is not a cube directory")
    group = json.loads((path / ".zgroup").read_text())
    if group.get("zarr_format") != 2:
        raise InvalidSpec(f"{path}: unsupported zarr_format {group.get('zarr_format')}")
    meta = _read_json(path / ".zattrs") if (path / ".zattrs").is_file() else {}
    dim_order = tuple(meta.pop("_cube_dim_order", CUBE_DIMS))
    dims = meta.pop("_cube_dims", None)
    gt_text = meta.pop("geotransform", None)
    geotransform = GeoTransform.from_string(gt_text) if gt_text else GeoTransform()
    if dims is None:
        dims = _infer_dims(path, dim_order)
    return Datacube(path, _validate_dims(dims, dim_order), geotransform,
                    {k: str(v) for k, v in meta.items()}, dim_order)


def _infer_dims(path: Path, dim_order) -> list[tuple[str, int]]:
    # groups written by other tools carry dims only on the arrays
    found: dict[str, int] = {}
    for child in path.iterdir():
        if (child / ".zarray").is_file():
            info = _read_info(child)
            for d, n in zip(info.dims, info.shape):
                if found.setdefault(d, n) != n:
                    raise DimMismatch(f"dimension {d} has lengths {found[d]} and {n}")
    return [(d, found[d]) for d in dim_order if d in found]


def add_dim(cube: Datacube, name: str, length: int) -> None:
    """Extend the cube with a new dimension (e.g. ``timepair``)."""
    if name in cube.dims:
        if cube.dims[name] != length:
            raise DimMismatch(f"{name} already has length {cube.dims[name]}")
        return
    merged = dict(cube.dims)
    merged[name] = length
    ordered = [(d, merged[d]) for d in cube.dim_order if d in merged]
    cube.dims = _validate_dims(ordered, cube.dim_order)
    _write_group_attrs(cube)


def write_var(cube: Datacube, var: RasterVar) -> None:
    """Persist ``var`` as chunk files; replaces an existing variable of that name."""
    _check_name(var.name)
    dtype = {"f32": "<f4", "u8": "|u1"}[var.dtype]
    if [d for d in cube.dim_order if d in var.dims] != list(var.dims):
        raise DimMismatch(f"{var.name}: dims {var.dims} not a subsequence of {cube.dim_order}")
    for d, n in zip(var.dims, var.shape):
        if d not in cube.dims:
            raise DimMismatch(f"{var.name}: cube has no dimension {d!r}")
        if cube.dims[d] != n:
            raise DimMismatch(f"{var.name}: {d} has length {n}, cube expects {cube.dims[d]}")
    if len(var.chunks) != len(var.dims):
        raise InvalidSpec(f"{var.name}: {len(var.chunks)} chunk lengths for {len(var.dims)} dims")
    for c, n in zip(var.chunks, var.shape):
        if not 1 <= c <= n:
            raise InvalidSpec(f"{var.name}: chunk length {c} outside [1, {n}]")
    if dtype == "|u1":
        bad = ~np.isin(var.data, MASK_VALUES)
        if bad.any():
            raise InvalidSpec(
                f"{var.name}: mask values must be in {MASK_VALUES}, found {np.unique(var.data[bad])[:5]}")

    vdir = cube.path / var.name
    if vdir.exists():
        shutil.rmtree(vdir)
    vdir.mkdir()
    fill = _FILL[dtype]
    data = np.ascontiguousarray(var.data, dtype=_DTYPES[dtype])
    grid = [math.ceil(n / c) for n, c in zip(var.shape, var.chunks)]
    for idx in itertools.product(*(range(g) for g in grid)):
        sl = tuple(slice(i * c, min((i + 1) * c, n)) for i, c, n in zip(idx, var.chunks, var.shape))
        block = data[sl]
        if block.shape != var.chunks:
            padded = np.full(var.chunks, fill, dtype=data.dtype)
            padded[tuple(slice(0, s) for s in block.shape)] = block
            block = padded
        (vdir / _chunk_key(idx)).write_bytes(np.ascontiguousarray(block).tobytes())
    _write_json(vdir / ".zattrs", {"_ARRAY_DIMENSIONS": list(var.dims)})
    # metadata last so a half-written variable is not listed
    _write_json(vdir / ".zarray", {
        "chunks": list(var.chunks),
        "compressor": None,
        "dtype": dtype,
        "fill_value": fill,
        "filters": None,
        "order": "C",
        "shape": list(var.shape),
        "zarr_format": 2,
    })


def read_var(cube: Datacube, name: str, window=None) -> np.ndarray:
    """Read a variable, optionally restricted to a window.

    ``window`` maps dimension names to half-open ``(start, stop)`` ranges;
    dimensions not mentioned are read in full. A sequence with one range (or
    None) per dimension is accepted as well.
    """
    info = cube.var_info(name)
    bounds = _resolve_window(info, window)
    out_shape = tuple(b - a for a, b in bounds)
    dt = _DTYPES[info.dtype]
    out = np.full(out_shape, info.fill_value, dtype=dt)
    if 0 in out_shape:
        return out
    ranges = [range(a // c, (b - 1) // c + 1) for (a, b), c in zip(bounds, info.chunks)]
    vdir = cube.path / name
    n_items = math.prod(info.chunks)
    for idx in itertools.product(*ranges):
        f = vdir / _chunk_key(idx)
        if not f.is_file():
            continue
        raw = f.read_bytes()
        if len(raw) != n_items * dt.itemsize:
            raise InvalidSpec(f"{f}: expected {n_items * dt.itemsize} bytes, got {len(raw)}")
        block = np.frombuffer(raw, dtype=dt).reshape(info.chunks)
        src, dst = [], []
        for i, c, (a, b) in zip(idx, info.chunks, bounds):
            lo, hi = max(a, i * c), min(b, (i + 1) * c)
            src.append(slice(lo - i * c, hi - i * c))
            dst.append(slice(lo - a, hi - a))
        out[tuple(dst)] = block[tuple(src)]
    return out


def _resolve_window(info: VarInfo, window) -> list[tuple[int, int]]:
    if window is None:
        return [(0, n) for n in info.shape]
    if isinstance(window, Mapping):
        extra = set(window) - set(info.dims)
        if extra:
            raise OutOfBounds(f"{info.name}: window names unknown dims {sorted(extra)}")
        spec = [window.get(d) for d in info.dims]
    else:
        spec = list(window)
        if len(spec) != len(info.dims):
            raise OutOfBounds(f"{info.name}: window has {len(spec)} ranges for {len(info.dims)} dims")
    bounds = []
    for d, n, r in zip(info.dims, info.shape, spec):
        if r is None:
            bounds.append((0, n))
            continue
        if isinstance(r, slice):
            if r.step not in (None, 1):
                raise OutOfBounds("strided windows are not supported")
            r = (0 if r.start is None else r.start, n if r.stop is None else r.stop)
        a, b = int(r[0]), int(r[1])
        if not 0 <= a <= b <= n:
            raise OutOfBounds(f"{info.name}: window [{a}, {b}) outside {d} length {n}")
        bounds.append((a, b))
    return bounds


def _read_info(vdir: Path) -> VarInfo:
    meta = _read_json(vdir / ".zarray")
    if meta.get("zarr_format") != 2:
        raise InvalidSpec(f"{vdir}: unsupported zarr_format")
    if meta.get("compressor") is not None or meta.get("filters"):
        raise InvalidSpec(f"{vdir}: compressed arrays are outside the supported subset")
    if meta.get("order", "C") != "C":
        raise InvalidSpec(f"{vdir}: only C order is supported")
    dtype = meta["dtype"]
    if dtype not in _DTYPES:
        raise InvalidSpec(f"{vdir}: unsupported dtype {dtype}")
    attrs_file = vdir / ".zattrs"
    attrs = _read_json(attrs_file) if attrs_file.is_file() else {}
    shape = tuple(meta["shape"])
    dims = tuple(attrs.get("_ARRAY_DIMENSIONS", [f"dim_{i}" for i in range(len(shape))]))
    fill = meta.get("fill_value")
    if fill is None:
        fill = _FILL[dtype]
    return VarInfo(vdir.name, dims, shape, tuple(meta["chunks"]), dtype, fill)


def chunk_count(shape: Iterable[int], chunks: Iterable[int]) -> int:
    return math.prod(math.ceil(n / c) for n, c in zip(shape, chunks))


def _chunk_key(idx: tuple[int, ...]) -> str:
    return ".".join(str(i) for i in idx) if idx else "0"


def _check_name(name: str) -> None:
    if not name or name.startswith(".") or "/" in name or os.sep in name:
        raise InvalidSpec(f"invalid variable name {name!r}")


def _write_group_attrs(cube: Datacube) -> None:
    meta = dict(cube.attrs)
    meta["_cube_dims"] = [[k, v] for k, v in cube.dims.items()]
    meta["_cube_dim_order"] = list(cube.dim_order)
    meta["geotransform"] = cube.geotransform.to_string()
    _write_json(cube.path / ".zattrs", meta)


def _write_json(path: Path, obj) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=4, sort_keys=True))
    os.replace(tmp, path)


def _read_json(path: Path):
    return json.loads(path.read_text())
