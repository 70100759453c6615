import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sarcube.cube_store import RasterVar, create_cube
from sarcube.errors import InvalidSpec, NotFound
from sarcube.preprocess import (
    ChannelSet, ChannelStats, InputConfig, assemble_inputs, log_stabilize, raw_channels,
    standardize, temporal_mean,
)

EXPECTED_COUNT = {"VV_only": 2, "VH_only": 2, "VV_VH": 4, "SAR_DEM": 8, "DEM_only": 4}


@pytest.fixture(scope="module")
def cube(tmp_path_factory):
    rng = np.random.default_rng(1)
    path = tmp_path_factory.mktemp("pp") / "cube"
    c = create_cube(path, [("timestep", 8), ("y", 6), ("x", 7)], attrs={"event_index": 4})
    for v in ("vv", "vh"):
        c.write_var(RasterVar(v, ("timestep", "y", "x"),
                              rng.gamma(1.0, 0.1, (8, 6, 7)).astype(np.float32)))
    for v in ("dem", "aspect", "slope", "curvature"):
        c.write_var(RasterVar(v, ("y", "x"), rng.standard_normal((6, 7)).astype(np.float32)))
    return c


def test_log_examples():
    out = log_stabilize(np.array([1.0, 0.0, math.e]))
    np.testing.assert_allclose(out, [0.0, math.log(1e-6), 1.0], rtol=1e-12)
    assert abs(out[1] - (-13.8155)) < 1e-4
    assert log_stabilize(np.float32(-3.0)) == np.float32(math.log(1e-6))


def test_temporal_mean_examples():
    g = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(temporal_mean([g, g, g]), g)
    assert temporal_mean([np.array([0.0]), np.array([2.0])])[0] == 1.0
    with pytest.raises(InvalidSpec):
        temporal_mean([])
    with pytest.raises(InvalidSpec):
        temporal_mean([np.zeros(2), np.zeros(3)])


def test_speckle_variance_of_mean():
    rng = np.random.default_rng(7)
    draws = rng.gamma(1.0, 1.0, size=(4, 100, 100))
    ratio = temporal_mean(draws).var() / draws[0].var()
    assert abs(ratio - 0.25) < 0.25 * 0.15


def test_standardize_examples():
    assert (standardize(np.full((3, 3), 5.0), mean=5.0, std=2.0) == 0).all()
    assert standardize(np.array([4.0]), mean=0.0, std=2.0)[0] == 2.0


def test_train_stats_standardize_to_unit():
    rng = np.random.default_rng(3)
    data = rng.standard_normal((10, 3, 16, 16)) * [[[5]], [[0.1]], [[30]]] + [[[2]], [[-1]], [[400]]]
    stats = ChannelStats.from_data(("a", "b", "c"), data)
    z = standardize(data, stats).astype(np.float64)
    flat = np.moveaxis(z, 1, 0).reshape(3, -1)
    assert np.abs(flat.mean(1)).max() < 1e-4
    assert np.abs(flat.std(1) - 1).max() < 1e-3


def test_stats_roundtrip_and_guard(tmp_path):
    s = ChannelStats(("a", "b"), [1.0, 2.0], [3.0, 4.0])
    s.save(tmp_path / "stats.json")
    t = ChannelStats.load(tmp_path / "stats.json")
    assert t.names == s.names and np.array_equal(t.mean, s.mean) and np.array_equal(t.std, s.std)
    with pytest.raises(InvalidSpec):
        ChannelStats(("a",), [0.0], [0.0])
    # a constant channel gets the floor instead of failing
    assert ChannelStats.from_data(("a",), np.ones((1, 4, 4))).std[0] > 0


@pytest.mark.parametrize("name", list(EXPECTED_COUNT))
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_channel_count_grid(cube, name, k):
    cfg = InputConfig.for_cube(cube, name, k)
    assert cfg.n_channels == EXPECTED_COUNT[name]
    assert raw_channels(cube, cfg).shape == (EXPECTED_COUNT[name], 6, 7)


def test_channel_order_and_values(cube):
    cfg = InputConfig.for_cube(cube, "SAR_DEM", 2)
    assert cfg.channels == ("VV_pre", "VH_pre", "VV_post", "VH_post",
                            "elevation", "aspect", "slope", "curvature")
    assert cfg.pre_indices == (2, 3) and cfg.post_indices == (4, 5)
    raw = raw_channels(cube, cfg)
    vv = cube.read_var("vv").astype(np.float64)
    np.testing.assert_allclose(raw[0], np.log(vv[2:4]).mean(0), rtol=1e-5)
    np.testing.assert_allclose(raw[3], np.log(cube.read_var("vh")[4:6].astype(np.float64)).mean(0),
                               rtol=1e-5)
    np.testing.assert_array_equal(raw[4], cube.read_var("dem"))


def test_dem_only_independent_of_k(cube):
    a = raw_channels(cube, InputConfig.for_cube(cube, "DEM_only", 1))
    b = raw_channels(cube, InputConfig.for_cube(cube, "DEM_only", 4))
    np.testing.assert_array_equal(a, b)


def test_pre_permutation_invariance(cube):
    a = raw_channels(cube, InputConfig("VV_VH", 3, (1, 2, 3), (4, 5, 6)))
    b = raw_channels(cube, InputConfig("VV_VH", 3, (3, 1, 2), (6, 4, 5)))
    np.testing.assert_allclose(a, b, rtol=1e-6, atol=1e-6)


def test_assemble_inputs(cube):
    cfg = InputConfig.for_cube(cube, "VV_VH", 1)
    raw = raw_channels(cube, cfg)
    stats = ChannelStats.from_data(cfg.channels, raw[None])
    z = assemble_inputs(cube, cfg, stats)
    assert z.dtype == np.float32
    np.testing.assert_allclose(z.reshape(4, -1).mean(1), 0, atol=1e-5)
    with pytest.raises(InvalidSpec):
        assemble_inputs(cube, InputConfig.for_cube(cube, "DEM_only", 1), stats)


def test_errors(cube, tmp_path):
    with pytest.raises(InvalidSpec):
        InputConfig.for_cube(cube, "VV_VH", 5)
    with pytest.raises(InvalidSpec):
        InputConfig("VV_VH", 2, (0,), (4, 5))
    with pytest.raises(InvalidSpec):
        ChannelSet.parse("infrared")
    with pytest.raises(InvalidSpec):
        InputConfig.around_event("VV_VH", 3, 2)
    bare = create_cube(tmp_path / "bare", [("timestep", 2), ("y", 3), ("x", 3)],
                       attrs={"event_index": 1})
    with pytest.raises(NotFound):
        raw_channels(bare, InputConfig.for_cube(bare, "VV_only", 1))
    with pytest.raises(NotFound):
        raw_channels(bare, InputConfig.for_cube(bare, "DEM_only", 1))


def test_channel_set_aliases():
    assert ChannelSet.parse("sar+dem") is ChannelSet.SAR_DEM
    assert ChannelSet.parse("VV") is ChannelSet.VV_only
    assert ChannelSet.parse("dem") is ChannelSet.DEM_only
    assert ChannelSet.parse(ChannelSet.VV_VH) is ChannelSet.VV_VH


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(0.01, 100), b=st.floats(-1e3, 1e3))
def test_affine_reencoding_invariance(seed, a, b):
    x = np.random.default_rng(seed).standard_normal((1, 8, 8)) * 50 + 200
    y = a * x + b
    zx = standardize(x, ChannelStats.from_data(("e",), x))
    zy = standardize(y, ChannelStats.from_data(("e",), y))
    np.testing.assert_allclose(zx, zy, atol=1e-5)
