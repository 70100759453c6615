"""Synthetic SAR datacubes with known landslide ground truth.

Terrain is a sum of random cosine modes. Landslides are smooth random blobs
restricted to slopes above a threshold. Backscatter is a smooth mean field
times unit-mean gamma speckle; after the event, landslide pixels are scaled
by ``landslide_drop``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter, uniform_filter

from .cube_store import GeoTransform, RasterVar, create_cube
from .errors import DegenerateScene, InvalidSpec
from .terrain import derive_terrain

log = logging.getLogger(__name__)


@dataclass
class SceneSpec:
    shape: tuple[int, int] = (1024, 1024)
    n_pre: int = 4
    n_post: int = 4
    seed: int = 0
    slope_threshold: float = 35.0   # degrees
    landslide_drop: float = 0.5     # linear power factor on landslide pixels after the event
    speckle_looks: int = 1
    target_prevalence: float = 0.1
    pixel_size: float = 10.0        # metres
    dem_amplitude: float = 100.0    # metres
    blob_sigma: float = 3.0         # pixels; landslide patch scale
    with_slc: bool = False

    def validate(self):
        if self.n_pre < 1 or self.n_post < 1:
            raise InvalidSpec("n_pre and n_post must be >= 1")
        if not 0 < self.landslide_drop < 1:
            raise InvalidSpec(f"landslide_drop must be in (0, 1), got {self.landslide_drop}")
        if self.speckle_looks < 1:
            raise InvalidSpec("speckle_looks must be >= 1")
        if not 0 < self.target_prevalence < 1:
            raise InvalidSpec("target_prevalence must be in (0, 1)")
        if min(self.shape) < 16:
            raise InvalidSpec(f"scene must be at least 16x16, got {self.shape}")
        return self


def _streams(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def gen_dem(shape, seed, amplitude=100.0, n_modes=10) -> np.ndarray:
    """Smooth random surface: ``n_modes`` plane-wave cosines with wavelengths
    of 32-256 pixels and random orientation and phase."""
    ny, nx = shape
    if ny < 16 or nx < 16:
        raise InvalidSpec(f"DEM must be at least 16x16, got {shape}")
    rng = np.random.default_rng(seed)
    wavelength = rng.uniform(32.0, 256.0, n_modes)
    theta = rng.uniform(0.0, 2 * np.pi, n_modes)
    phase = rng.uniform(0.0, 2 * np.pi, n_modes)
    weight = rng.uniform(0.5, 1.5, n_modes)
    weight *= amplitude / np.sqrt((weight ** 2).sum() / 2)
    yy, xx = np.mgrid[0:ny, 0:nx].astype(np.float64)
    z = np.zeros(shape, dtype=np.float64)
    for lam, th, ph, a in zip(wavelength, theta, phase, weight):
        k = 2 * np.pi / lam
        z += a * np.cos(k * (np.cos(th) * xx + np.sin(th) * yy) + ph)
    return z.astype(np.float32)


def _smooth_noise(rng, shape, sigma):
    g = gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return (g - g.mean()) / g.std()


def speckle(rng, looks, shape) -> np.ndarray:
    """Unit-mean gamma intensity speckle with ``looks`` looks."""
    return rng.gamma(looks, 1.0 / looks, size=shape)


def landslide_mask(slope, noise, threshold, prevalence) -> np.ndarray:
    """Pick the top blob values among steep pixels to hit ``prevalence``."""
    steep = slope > threshold
    n_steep = int(steep.sum())
    if n_steep == 0:
        raise DegenerateScene(f"no pixels steeper than {threshold} degrees")
    want = prevalence * slope.size
    if want >= n_steep:
        log.warning("only %.3f of pixels are steep; prevalence capped", n_steep / slope.size)
        return steep.astype(np.uint8)
    cut = np.quantile(noise[steep], 1.0 - want / n_steep)
    mask = steep & (noise > cut)
    if not mask.any():
        # ties at the cut; retry with the lowest quantile (every steep pixel)
        log.warning("no pixels above the blob quantile; using all steep pixels")
        mask = steep
    return mask.astype(np.uint8)


def simulate_scene(spec: SceneSpec) -> dict:
    """All scene layers as arrays (see :func:`gen_scene` for the cube form)."""
    spec.validate()
    r_dem, r_blob, r_mu, r_vv, r_vh, r_slc = _streams(spec.seed, 6)
    shape = tuple(spec.shape)
    dem = gen_dem(shape, int(r_dem.integers(2**31)), spec.dem_amplitude)
    terr = derive_terrain(dem, spec.pixel_size)
    mask = landslide_mask(terr.slope, _smooth_noise(r_blob, shape, spec.blob_sigma),
                          spec.slope_threshold, spec.target_prevalence)
    mu_vv = 0.1 * np.exp(0.4 * _smooth_noise(r_mu, shape, 8.0))
    mu_vh = 0.25 * mu_vv * np.exp(0.2 * _smooth_noise(r_mu, shape, 8.0))
    drop = np.where(mask == 1, spec.landslide_drop, 1.0)
    n_t = spec.n_pre + spec.n_post
    vv = np.empty((n_t,) + shape, dtype=np.float32)
    vh = np.empty((n_t,) + shape, dtype=np.float32)
    for t in range(n_t):
        f = drop if t >= spec.n_pre else 1.0
        vv[t] = mu_vv * f * speckle(r_vv, spec.speckle_looks, shape)
        vh[t] = mu_vh * f * speckle(r_vh, spec.speckle_looks, shape)
    out = {"vv": vv, "vh": vh, "dem": dem, "slope": terr.slope.astype(np.float32),
           "aspect": terr.aspect.astype(np.float32), "curvature": terr.curvature.astype(np.float32), "label": mask, "event_index": spec.n_pre,
           "mu_vv": mu_vv.astype(np.float32), "mu_vh": mu_vh.astype(np.float32)}
    if spec.with_slc:
        out["slc"] = _simulate_slc(r_slc, mu_vv, mask, spec)
    return out


def _simulate_slc(rng, mu, mask, spec, coherence=0.9):
    """Complex SLC stack: a persistent scatterer field plus per-date noise;
    landslide pixels get a new scatterer field after the event."""
    shape = mu.shape

    def cgauss():
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    before, after = cgauss(), cgauss()
    after = np.where(mask == 1, after, before)
    amp = np.sqrt(mu)
    stack = []
    for t in range(spec.n_pre + spec.n_post):
        base = before if t < spec.n_pre else after
        stack.append(amp * (np.sqrt(coherence) * base + np.sqrt(1 - coherence) * cgauss()))
    return np.stack(stack).astype(np.complex64)


def gen_scene(spec: SceneSpec, path):
    """Generate a scene and write it as a cube at ``path``."""
    layers = simulate_scene(spec)
    n_t = spec.n_pre + spec.n_post
    ny, nx = spec.shape
    gt = GeoTransform(0.0, ny * spec.pixel_size, spec.pixel_size, -spec.pixel_size)
    attrs = {"event_index": str(spec.n_pre), "crs": "LOCAL", "source": "synthetic",
             "scene_spec": repr(asdict(spec))}
    cube = create_cube(Path(path), [("timestep", n_t), ("y", ny), ("x", nx)], gt, attrs)
    for name in ("vv", "vh"):
        cube.write_var(RasterVar(name, ("timestep", "y", "x"), layers[name]))
    for name in ("dem", "slope", "aspect", "curvature"):
        cube.write_var(RasterVar(name, ("y", "x"), layers[name].astype(np.float32)))
    cube.write_var(RasterVar("label", ("y", "x"), layers["label"]))
    if spec.with_slc:
        slc = layers["slc"]
        cube.write_var(RasterVar("slc_re", ("timestep", "y", "x"), slc.real.astype(np.float32)))
        cube.write_var(RasterVar("slc_im", ("timestep", "y", "x"), slc.imag.astype(np.float32)))
    return cube


def change_oracle(vv, vh, event_index, window=5) -> np.ndarray:
    """Landslide score from the known generative model: the drop in mean
    log-power after the event, averaged over both polarisations and a small
    window. Higher means more likely a landslide."""
    logs = [np.log(np.maximum(np.asarray(s, dtype=np.float64), 1e-6)) for s in (vv, vh)]
    ratio = sum(l[:event_index].mean(axis=0) - l[event_index:].mean(axis=0) for l in logs) / 2
    return uniform_filter(ratio, window, mode="nearest")
