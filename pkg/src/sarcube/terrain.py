"""Slope, aspect and curvature from a gridded DEM.

Rows run north to south and columns west to east. Slope and aspect use
Horn's 3x3 weighted differences; curvature is the Zevenbergen-Thorne
general curvature -2(D + E). Borders are handled by edge replication so the
outputs have the DEM's shape.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpec, TooSmall

FLAT_SLOPE_DEG = 1e-8
FLAT_ASPECT = -1.0


@dataclass
class TerrainLayers:
    slope: np.ndarray      # degrees, [0, 90]
    aspect: np.ndarray     # degrees clockwise from north, [0, 360) or -1 where flat
    curvature: np.ndarray  # 1 / map units


def _neighbours(dem):
    p = np.pad(dem, 1, mode="edge")
    h, w = dem.shape
    # a b c / d e f / g h i, with the first row to the north
    return {
        "a": p[:-2, :-2], "b": p[:-2, 1:-1], "c": p[:-2, 2:],
        "d": p[1:-1, :-2], "e": p[1:-1, 1:-1], "f": p[1:-1, 2:],
        "g": p[2:, :-2], "h": p[2:, 1:-1], "i": p[2:, 2:],
    }


def horn_gradient(dem, pixel_size):
    """Return (dz/dx east, dz/dy north) from Horn's 1-2-1 weighted stencil."""
    n = _neighbours(np.asarray(dem, dtype=np.float64))
    dzdx = ((n["c"] + 2 * n["f"] + n["i"]) - (n["a"] + 2 * n["d"] + n["g"])) / (8.0 * pixel_size)
    dzdy = ((n["a"] + 2 * n["b"] + n["c"]) - (n["g"] + 2 * n["h"] + n["i"])) / (8.0 * pixel_size)
    return dzdx, dzdy


def derive_terrain(dem, pixel_size) -> TerrainLayers:
    dem = np.asarray(dem)
    if dem.ndim != 2 or dem.shape[0] < 3 or dem.shape[1] < 3:
        raise TooSmall(f"DEM must be at least 3x3, got {dem.shape}")
    if not pixel_size > 0:
        raise InvalidSpec(f"pixel_size must be positive, got {pixel_size}")
    dzdx, dzdy = horn_gradient(dem, pixel_size)
    slope = np.degrees(np.arctan(np.hypot(dzdx, dzdy)))
    # steepest descent points along -grad; compass bearing = atan2(east, north)
    aspect = np.degrees(np.arctan2(-dzdx, -dzdy)) % 360.0
    # % can round tiny negatives up to exactly 360
    aspect[aspect >= 360.0] = 0.0
    aspect[slope < FLAT_SLOPE_DEG] = FLAT_ASPECT

    n = _neighbours(np.asarray(dem, dtype=np.float64))
    L2 = float(pixel_size) ** 2
    d = ((n["d"] + n["f"]) / 2.0 - n["e"]) / L2
    e = ((n["b"] + n["h"]) / 2.0 - n["e"]) / L2
    curvature = -2.0 * (d + e)
    # float64 here; callers cast when storing
    return TerrainLayers(slope, aspect, curvature)


def write_terrain(cube, dem_var="dem", pixel_size=None) -> TerrainLayers:
    """Derive terrain layers from ``dem_var`` and store them in the cube."""
    from .cube_store import RasterVar

    dem = cube.read_var(dem_var)
    if pixel_size is None:
        pixel_size = abs(cube.geotransform.pixel_w)
    layers = derive_terrain(dem, pixel_size)
    for name in ("slope", "aspect", "curvature"):
        cube.write_var(RasterVar(name, ("y", "x"), getattr(layers, name).astype(np.float32)))
    return layers
