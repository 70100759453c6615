import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sarcube.chipper import (
    Chip, extract_chips, filter_positive, load_chips, save_chips, split_chips, tile_grid,
)
from sarcube.errors import InvalidSpec, TooFew, TooSmall


def fake_chips(n, c=2, size=4, seed=0):
    rng = np.random.default_rng(seed)
    return [Chip(rng.standard_normal((c, size, size)).astype(np.float32),
                 (rng.random((size, size)) < 0.3).astype(np.uint8), (i * size, 0))
            for i in range(n)]


@pytest.mark.parametrize("shape,count", [((256, 256), 4), ((300, 300), 4),
                                         ((4398, 5382), 34 * 42), ((128, 128), 1)])
def test_tile_counts(shape, count):
    assert len(tile_grid(shape)) == count


def test_tile_too_small():
    with pytest.raises(TooSmall):
        tile_grid((127, 500))


@settings(max_examples=50, deadline=None)
@given(ny=st.integers(16, 400), nx=st.integers(16, 400), chip=st.integers(4, 64))
def test_tiles_disjoint_and_inside(ny, nx, chip):
    origins = tile_grid((ny, nx), chip) if min(ny, nx) >= chip else []
    cover = np.zeros((ny, nx), int)
    for y, x in origins:
        assert y + chip <= ny and x + chip <= nx
        cover[y:y + chip, x:x + chip] += 1
    assert cover.max(initial=0) <= 1
    assert len(origins) == (ny // chip) * (nx // chip)


def test_filter_positive_examples():
    mask = np.zeros((256, 256), np.uint8)
    mask[10:20, 140:150] = 1          # only the top-right quadrant
    inputs = np.zeros((1, 256, 256), np.float32)
    chips = extract_chips(inputs, mask, tile_grid(mask.shape))
    kept = filter_positive(chips)
    assert [c.origin for c in kept] == [(0, 128)]

    single = np.zeros((128, 128), np.uint8)
    single[5, 5] = 1
    assert len(filter_positive(extract_chips(inputs[:, :128, :128], single, [(0, 0)]))) == 1
    assert filter_positive(extract_chips(inputs[:, :128, :128], single * 0, [(0, 0)])) == []


def test_nodata_counts_negative():
    mask = np.full((128, 128), 255, np.uint8)
    chip = extract_chips(np.zeros((1, 128, 128)), mask, [(0, 0)])[0]
    assert chip.positives == 0 and chip.mask.max() == 0


def test_filter_idempotent():
    chips = fake_chips(20)
    chips[3].mask[:] = 0
    once = filter_positive(chips)
    assert filter_positive(once) == once and len(once) == 19


def test_split_277_chips():
    labels = split_chips(fake_chips(277, size=2), 61 / 277, seed=0)
    assert labels.count("test") == 61 and labels.count("train") == 216


def test_split_two():
    assert sorted(split_chips(fake_chips(2), 0.5, 3)) == ["test", "train"]


def test_split_determinism():
    a = split_chips(fake_chips(100, size=2), 0.2, 7)
    b = split_chips(fake_chips(100, size=2), 0.2, 7)
    c = split_chips(fake_chips(100, size=2), 0.2, 8)
    assert a == b and a != c


def test_split_errors():
    with pytest.raises(TooFew):
        split_chips(fake_chips(1), 0.5, 0)
    with pytest.raises(InvalidSpec):
        split_chips(fake_chips(4), 1.0, 0)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 300), f=st.floats(0.01, 0.99), seed=st.integers(0, 1000))
def test_split_partition(n, f, seed):
    chips = fake_chips(n, size=1)
    labels = split_chips(chips, f, seed)
    n_test = labels.count("test")
    assert 1 <= n_test <= n - 1
    assert len(labels) == n and set(labels) <= {"train", "test"}
    assert [c.split for c in chips] == labels


def test_save_load_roundtrip(tmp_path):
    chips = fake_chips(5, c=3, size=8)
    split_chips(chips, 0.4, 1)
    save_chips(tmp_path / "chips", chips, ("a", "b", "c"), extra={"note": 1})
    back, index = load_chips(tmp_path / "chips")
    assert index["channels"] == ["a", "b", "c"] and index["note"] == 1
    for a, b in zip(chips, back):
        assert a.origin == b.origin and a.split == b.split
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.mask, b.mask)
    with pytest.raises(TooFew):
        save_chips(tmp_path / "none", [], ())
