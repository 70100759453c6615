import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sarcube.cube_store import RasterVar, create_cube, open_cube
from sarcube.errors import InvalidSpec, ShapeError
from sarcube.insar import (
    as_complex, consecutive_pairs, estimate_coherence, expand_looks, form_interferogram, multilook,
    process_cube,
)


def cnoise(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def brute_coherence(s1, s2, wy, wx):
    h, w = s1.shape
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            rows = np.clip(np.arange(i - wy // 2, i + wy // 2 + 1), 0, h - 1)
            cols = np.clip(np.arange(j - wx // 2, j + wx // 2 + 1), 0, w - 1)
            a = s1[np.ix_(rows, cols)]
            b = s2[np.ix_(rows, cols)]
            den = np.sqrt((abs(a) ** 2).sum() * (abs(b) ** 2).sum())
            out[i, j] = abs((a * np.conj(b)).sum()) / den if den > 0 else 0.0
    return out


def test_interferogram_examples():
    rng = np.random.default_rng(0)
    s1 = cnoise(rng, (4, 5))
    ifg = form_interferogram(s1, s1)
    np.testing.assert_allclose(np.angle(ifg), 0, atol=1e-12)
    np.testing.assert_allclose(ifg.real, np.abs(s1) ** 2, rtol=1e-12)
    shifted = form_interferogram(s1, s1 * np.exp(1j * np.pi / 2))
    np.testing.assert_allclose(np.angle(shifted), -np.pi / 2, atol=1e-12)
    assert not form_interferogram(np.zeros((2, 2), complex), np.zeros((2, 2), complex)).any()
    s2 = cnoise(rng, (4, 5))
    np.testing.assert_allclose(form_interferogram(s1, s2), np.conj(form_interferogram(s2, s1)))
    with pytest.raises(ShapeError):
        form_interferogram(s1, s1[:2])


def test_coherence_identical_inputs():
    s = cnoise(np.random.default_rng(1), (30, 40))
    g = estimate_coherence(s, s)
    assert g.dtype == np.float32
    assert np.abs(g - 1).max() < 1e-6


def test_coherence_independent_noise():
    r = np.random.default_rng(2)
    g = estimate_coherence(cnoise(r, (100, 100)), cnoise(r, (100, 100)), (5, 5))
    assert g.mean() < 0.3 and g.size == 10_000


def test_coherence_half_and_half():
    r = np.random.default_rng(3)
    s1 = cnoise(r, (40, 40))
    s2 = s1.copy()
    s2[:, 20:] = cnoise(r, (40, 20))
    g = estimate_coherence(s1, s2, (5, 5))
    assert np.abs(g[:, :18] - 1).max() < 1e-6
    assert g[:, 23:].mean() < 0.4


def test_coherence_zero_energy_and_errors():
    z = np.zeros((6, 6), complex)
    assert not estimate_coherence(z, z).any()
    with pytest.raises(InvalidSpec):
        estimate_coherence(z, z, (4, 5))
    with pytest.raises(ShapeError):
        estimate_coherence(z, z[:3])


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), wy=st.sampled_from([1, 3, 5]), wx=st.sampled_from([1, 3, 5, 7]))
def test_coherence_matches_brute_force(seed, wy, wx):
    r = np.random.default_rng(seed)
    s1, s2 = cnoise(r, (9, 11)), cnoise(r, (9, 11))
    s2 = 0.6 * s1 + 0.4 * s2
    np.testing.assert_allclose(estimate_coherence(s1, s2, (wy, wx)), brute_coherence(s1, s2, wy, wx),
                               atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), mag=st.floats(1e-3, 1e3), phase=st.floats(-np.pi, np.pi))
def test_coherence_scalar_invariance_and_range(seed, mag, phase):
    r = np.random.default_rng(seed)
    s1, s2 = cnoise(r, (16, 16)), cnoise(r, (16, 16))
    g = estimate_coherence(s1, s2)
    c = mag * np.exp(1j * phase)
    assert ((g >= 0) & (g <= 1)).all()
    np.testing.assert_allclose(estimate_coherence(c * s1, s2), g, atol=1e-6)
    np.testing.assert_allclose(estimate_coherence(s1, c * s2), g, atol=1e-6)


def test_multilook_examples():
    x = np.random.default_rng(4).standard_normal((3, 7)).astype(np.float32)
    np.testing.assert_array_equal(multilook(x, (1, 1)), x)
    assert multilook(np.array([[1.0, 2, 3, 4, 5]]), (1, 5)).tolist() == [[3.0]]
    assert multilook(np.ones((7, 12)), (2, 5)).shape == (3, 2)
    with pytest.raises(InvalidSpec):
        multilook(x, (0, 5))


def test_multilook_speckle_variance():
    r = np.random.default_rng(5)
    sp = r.gamma(1.0, 1.0, (100, 500))
    ratio = sp.var() / multilook(sp, (1, 5)).var()
    assert abs(ratio - 5) < 5 * 0.2


def test_expand_looks_shape():
    small = np.arange(6.0).reshape(2, 3)
    big = expand_looks(small, (1, 5), (3, 17))
    assert big.shape == (3, 17)
    assert big[0, :5].tolist() == [0.0] * 5 and big[2, 16] == 5.0


def test_as_complex():
    c = as_complex(np.ones(3), np.arange(3))
    assert c.dtype == np.complex64 and c[2] == 1 + 2j
    with pytest.raises(ShapeError):
        as_complex(np.ones(3), np.ones(2))


def test_process_cube(tmp_path):
    r = np.random.default_rng(6)
    base = cnoise(r, (10, 15))
    stack = np.stack([base, base * np.exp(0.3j), cnoise(r, (10, 15))])
    cube = create_cube(tmp_path / "c", [("timestep", 3), ("y", 10), ("x", 15)])
    cube.write_var(RasterVar("slc_re", ("timestep", "y", "x"), stack.real.astype(np.float32)))
    cube.write_var(RasterVar("slc_im", ("timestep", "y", "x"), stack.imag.astype(np.float32)))
    assert process_cube(cube, window=(5, 5), looks=(1, 5)) == consecutive_pairs(3)
    again = open_cube(cube.path)
    assert again.dims["timepair"] == 2
    coh = again.read_var("coherence")
    assert coh.shape == (2, 10, 15)
    assert np.abs(coh[0] - 1).max() < 1e-5 and coh[1].mean() < 0.5
    phase = np.arctan2(again.read_var("interferogram_im")[0], again.read_var("interferogram_re")[0])
    np.testing.assert_allclose(phase, -0.3, atol=1e-5)
    assert again.attrs["timepairs"] == "0-1;1-2"
