"""Interferogram formation, coherence estimation and multilooking.

Inputs are co-registered complex rasters as numpy complex arrays (y, x).
No phase unwrapping is done anywhere.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidSpec, ShapeError


def as_complex(re, im) -> np.ndarray:
    re, im = np.asarray(re), np.asarray(im)
    if re.shape != im.shape:
        raise ShapeError(f"real part {re.shape} vs imaginary part {im.shape}")
    return (re.astype(np.float32) + 1j * im.astype(np.float32)).astype(np.complex64)


def form_interferogram(s1, s2) -> np.ndarray:
    """s1 * conj(s2); the phase is phi1 - phi2 (wrapped)."""
    s1, s2 = np.asarray(s1), np.asarray(s2)
    if s1.shape != s2.shape:
        raise ShapeError(f"shapes differ: {s1.shape} vs {s2.shape}")
    return s1 * np.conj(s2)


def box_sum(x, window) -> np.ndarray:
    """Sum over a centred (wy, wx) window with edge replication."""
    wy, wx = window
    ry, rx = wy // 2, wx // 2
    p = np.pad(x, ((ry, ry), (rx, rx)), mode="edge")
    h, w = x.shape
    # separable shifted adds; no running-sum drift on large rasters
    rows = sum(p[i:i + h] for i in range(wy))
    return sum(rows[:, j:j + w] for j in range(wx))


def estimate_coherence(s1, s2, window=(5, 5)) -> np.ndarray:
    """|sum s1 conj(s2)| / sqrt(sum |s1|^2 * sum |s2|^2) over each window.

    Zero where either window has zero energy; clamped to [0, 1].
    """
    wy, wx = (int(v) for v in window)
    if wy < 1 or wx < 1 or wy % 2 == 0 or wx % 2 == 0:
        raise InvalidSpec(f"coherence window must be odd and positive, got {window}")
    s1 = np.asarray(s1, dtype=np.complex128)
    s2 = np.asarray(s2, dtype=np.complex128)
    if s1.shape != s2.shape:
        raise ShapeError(f"shapes differ: {s1.shape} vs {s2.shape}")
    cross = s1 * np.conj(s2)
    num = np.hypot(box_sum(cross.real, (wy, wx)), box_sum(cross.imag, (wy, wx)))
    e1 = box_sum(np.abs(s1) ** 2, (wy, wx))
    e2 = box_sum(np.abs(s2) ** 2, (wy, wx))
    denom = np.sqrt(e1 * e2)
    gamma = np.zeros_like(num)
    ok = denom > 0
    gamma[ok] = num[ok] / denom[ok]
    return np.clip(gamma, 0.0, 1.0).astype(np.float32)


def multilook(x, looks=(1, 5)) -> np.ndarray:
    """Block mean over (azimuth, range) looks; partial blocks are dropped."""
    az, rg = (int(v) for v in looks)
    if az < 1 or rg < 1:
        raise InvalidSpec(f"looks must be >= 1, got {looks}")
    x = np.asarray(x)
    h, w = x.shape[0] // az, x.shape[1] // rg
    blocks = x[:h * az, :w * rg].reshape(h, az, w, rg)
    acc = np.complex128 if np.iscomplexobj(x) else np.float64
    out = blocks.mean(axis=(1, 3), dtype=acc)
    return out.astype(np.complex64 if np.iscomplexobj(x) else np.float32)


def expand_looks(x, looks, shape) -> np.ndarray:
    """Nearest-neighbour inverse of :func:`multilook` back onto ``shape``;
    rows/columns lost to partial blocks repeat the last block."""
    az, rg = looks
    up = np.repeat(np.repeat(x, az, axis=0), rg, axis=1)
    pad = ((0, shape[0] - up.shape[0]), (0, shape[1] - up.shape[1]))
    return np.pad(up, pad, mode="edge") if any(p[1] for p in pad) else up


def consecutive_pairs(n_timesteps) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n_timesteps - 1)]


def process_cube(cube, pairs="consecutive", window=(5, 5), looks=(1, 5),
                 slc_prefix="slc"):
    """Form interferograms and coherence for timestep pairs of a cube.

    Reads ``<prefix>_re`` / ``<prefix>_im`` (timestep, y, x), writes
    ``interferogram_re``, ``interferogram_im`` and ``coherence`` along a new
    ``timepair`` dimension. Products are computed at full resolution,
    multilooked, then expanded back onto the cube grid.
    """
    from .cube_store import RasterVar, add_dim

    n = cube.dims.get("timestep", 0)
    if pairs == "consecutive":
        pairs = consecutive_pairs(n)
    if not pairs:
        raise InvalidSpec("need at least one timestep pair")
    re = cube.read_var(f"{slc_prefix}_re")
    im = cube.read_var(f"{slc_prefix}_im")
    shape = re.shape[1:]
    add_dim(cube, "timepair", len(pairs))
    ifg_re, ifg_im, coh = [], [], []
    for a, b in pairs:
        s1, s2 = as_complex(re[a], im[a]), as_complex(re[b], im[b])
        ifg = expand_looks(multilook(form_interferogram(s1, s2), looks), looks, shape)
        gamma = expand_looks(multilook(estimate_coherence(s1, s2, window), looks), looks, shape)
        ifg_re.append(ifg.real)
        ifg_im.append(ifg.imag)
        coh.append(gamma)
    dims = ("timepair", "y", "x")
    cube.write_var(RasterVar("interferogram_re", dims, np.stack(ifg_re).astype(np.float32)))
    cube.write_var(RasterVar("interferogram_im", dims, np.stack(ifg_im).astype(np.float32)))
    cube.write_var(RasterVar("coherence", dims, np.stack(coh).astype(np.float32)))
    cube.set_attrs(timepairs=";".join(f"{a}-{b}" for a, b in pairs))
    return pairs
