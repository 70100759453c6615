"""Fetching published cube archives and rasterising landslide polygons."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import tempfile
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from filelock import FileLock

from . import kernels
from .cube_store import GeoTransform
from .errors import FetchError, IntegrityError, InvalidGeometry, InvalidSpec

log = logging.getLogger(__name__)

_BLOCK = 1 << 20


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(_BLOCK), b""):
            h.update(block)
    return h.hexdigest()


def _target_path(url: str, dest) -> Path:
    dest = Path(dest)
    if dest.is_dir() or str(dest).endswith(os.sep):
        name = Path(urllib.parse.urlparse(url).path).name or "download"
        return dest / name
    return dest


def fetch_verify(url: str, sha256: str, dest, timeout: float = 60.0) -> Path:
    """Download ``url`` to ``dest`` unless a file with the right digest is there.

    ``dest`` may be a file path or an existing directory (the URL's basename
    is used). The download goes to a temporary file that is only moved into
    place after its digest checks out; concurrent calls for the same
    destination serialise on a lock file.
    """
    sha256 = sha256.lower()
    target = _target_path(url, dest)
    target.parent.mkdir(parents=True, exist_ok=True)
    with FileLock(str(target) + ".lock"):
        if target.is_file():
            if sha256_file(target) == sha256:
                log.info("cache hit %s", target)
                return target
            log.warning("cached %s has wrong digest, refetching", target)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=target.name + ".", suffix=".part")
        try:
            h = hashlib.sha256()
            with os.fdopen(fd, "wb") as out:
                try:
                    with urllib.request.urlopen(url, timeout=timeout) as resp:
                        for block in iter(lambda: resp.read(_BLOCK), b""):
                            h.update(block)
                            out.write(block)
                except (urllib.error.URLError, OSError, ValueError) as exc:
                    raise FetchError(f"could not fetch {url}: {exc}") from exc
            digest = h.hexdigest()
            if digest != sha256:
                raise IntegrityError(f"{url}: sha256 {digest} != expected {sha256}")
            os.replace(tmp, target)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
    return target


def unpack_archive(path, out_dir) -> Path:
    """Extract a zip/tar archive; returns the output directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    shutil.unpack_archive(str(path), str(out_dir))
    return out_dir


@dataclass
class LabelPolygon:
    exterior: list
    holes: list = field(default_factory=list)

    def __post_init__(self):
        self.exterior = _check_ring(self.exterior)
        self.holes = [_check_ring(r) for r in self.holes]

    def rings(self):
        return [self.exterior, *self.holes]

    def translated(self, dx, dy) -> "LabelPolygon":
        return LabelPolygon(self.exterior + [dx, dy], [r + [dx, dy] for r in self.holes])


def _check_ring(ring) -> np.ndarray:
    arr = np.asarray(ring, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidGeometry(f"ring must be a list of (x, y) pairs, got shape {arr.shape}")
    if len(arr) < 4:
        raise InvalidGeometry(f"ring needs at least 4 vertices, got {len(arr)}")
    if not np.array_equal(arr[0], arr[-1]):
        raise InvalidGeometry("ring is not closed (first vertex != last vertex)")
    if not np.isfinite(arr).all():
        raise InvalidGeometry("ring has non-finite coordinates")
    return arr


def _edges(poly: LabelPolygon) -> np.ndarray:
    parts = [np.hstack([r[:-1], r[1:]]) for r in poly.rings()]
    return np.vstack(parts)


def rasterize_mask(polygons, geotransform: GeoTransform, shape) -> np.ndarray:
    """Burn polygons into a u8 mask: 1 where the pixel centre is inside.

    Each polygon is filled with the even-odd rule over all of its rings, so
    holes subtract; the result is the union over polygons. Crossings are
    half-open: an edge counts on a scanline when exactly one endpoint lies
    strictly above it, and a centre exactly on a left edge is inside while
    one on a right edge is outside.
    """
    ny, nx = (int(s) for s in shape)
    if ny < 1 or nx < 1:
        raise InvalidSpec(f"mask shape must be at least 1x1, got {shape}")
    mask = np.zeros((ny, nx), dtype=np.uint8)
    row_y, _ = geotransform.pixel_centers((ny, nx))
    col0 = geotransform.origin_x + 0.5 * geotransform.pixel_w
    for poly in polygons:
        if not isinstance(poly, LabelPolygon):
            poly = LabelPolygon(*poly) if isinstance(poly, tuple) else LabelPolygon(poly)
        mask |= kernels.scanline_parity(_edges(poly), row_y, col0, geotransform.pixel_w, nx)
    return mask


def load_polygons(path) -> list[LabelPolygon]:
    """Read Polygon / MultiPolygon coordinates from a GeoJSON-like file.

    Accepts a FeatureCollection, a Feature, a bare geometry, or a list of any
    of those. Other geometry types are rejected.
    """
    obj = json.loads(Path(path).read_text())
    return list(_polygons_from(obj))


def _polygons_from(obj):
    if isinstance(obj, list):
        for item in obj:
            yield from _polygons_from(item)
        return
    kind = obj.get("type")
    if kind == "FeatureCollection":
        for feat in obj.get("features", []):
            yield from _polygons_from(feat)
    elif kind == "Feature":
        if obj.get("geometry") is not None:
            yield from _polygons_from(obj["geometry"])
    elif kind == "Polygon":
        yield _polygon(obj["coordinates"])
    elif kind == "MultiPolygon":
        for coords in obj["coordinates"]:
            yield _polygon(coords)
    else:
        raise InvalidGeometry(f"unsupported geometry type {kind!r}")


def _polygon(coords) -> LabelPolygon:
    if not coords:
        raise InvalidGeometry("polygon without rings")
    rings = [[pt[:2] for pt in ring] for ring in coords]
    return LabelPolygon(rings[0], rings[1:])
