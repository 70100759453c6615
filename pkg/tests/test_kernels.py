import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sarcube import kernels
from sarcube.kernels import _pykernels

BACKENDS = kernels.available_backends()
needs_c = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")


def test_fallback_selected_by_env():
    code = "import sarcube.kernels as k; print(k.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"SARCUBE_KERNELS": "python", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"


def test_im2col_col2im_adjoint():
    # <im2col(x), c> == <x, col2im(c)>
    r = np.random.default_rng(0)
    x = r.standard_normal((2, 3, 7, 6))
    c = r.standard_normal((2, 27, 5 * 4))
    for stride in (1, 2):
        oh, ow = (7 - 3) // stride + 1, (6 - 3) // stride + 1
        cc = c[:, :, :oh * ow]
        lhs = (kernels.im2col(x, 3, 3, stride) * cc).sum()
        rhs = (x * kernels.col2im(cc, x.shape, 3, 3, stride)).sum()
        assert abs(lhs - rhs) < 1e-10


def test_maxpool_ties_take_first():
    x = np.ones((1, 1, 2, 2), np.float32)
    out, idx = kernels.maxpool2_forward(x)
    assert out.item() == 1 and idx.item() == 0


@needs_c
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 3), c=st.integers(1, 4),
       h=st.integers(3, 12), w=st.integers(3, 12), k=st.sampled_from([1, 3]),
       stride=st.sampled_from([1, 2]), dtype=st.sampled_from([np.float32, np.float64]))
def test_backends_agree_conv(seed, n, c, h, w, k, stride, dtype):
    r = np.random.default_rng(seed)
    x = r.standard_normal((n, c, h, w)).astype(dtype)
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    a, b = py.im2col(x, k, k, stride), cy.im2col(x, k, k, stride)
    assert a.dtype == b.dtype == dtype
    np.testing.assert_array_equal(a, b)
    cols = r.standard_normal(a.shape).astype(dtype)
    np.testing.assert_allclose(py.col2im(cols, x.shape, k, k, stride),
                               cy.col2im(cols, x.shape, k, k, stride), rtol=1e-6, atol=1e-6)


@needs_c
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), h=st.integers(2, 11), w=st.integers(2, 11),
       ties=st.booleans())
def test_backends_agree_pooling(seed, h, w, ties):
    r = np.random.default_rng(seed)
    x = r.standard_normal((2, 3, h, w)).astype(np.float32)
    if ties:
        x = np.round(x)
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    (oa, ia), (ob, ib) = py.maxpool2_forward(x), cy.maxpool2_forward(x)
    np.testing.assert_array_equal(oa, ob)
    np.testing.assert_array_equal(ia, ib)
    g = r.standard_normal(oa.shape).astype(np.float32)
    np.testing.assert_array_equal(py.maxpool2_backward(g, ia, x.shape),
                                  cy.maxpool2_backward(g, ib, x.shape))
    up = r.standard_normal((2, 3, 2 * (h // 2), 2 * (w // 2))).astype(np.float32)
    # summation order may differ by one rounding
    np.testing.assert_allclose(py.upsample2_backward(up), cy.upsample2_backward(up),
                               rtol=1e-6, atol=1e-6)


@needs_c
@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), nv=st.integers(3, 9))
def test_backends_agree_scanline(seed, nv):
    r = np.random.default_rng(seed)
    ring = r.uniform(0, 20, (nv, 2))
    ring = np.vstack([ring, ring[:1]])
    edges = np.hstack([ring[:-1], ring[1:]])
    row_y = 20 - (np.arange(20) + 0.5)
    a = _pykernels.scanline_parity(edges, row_y, 0.5, 1.0, 20)
    b = BACKENDS["cython"].scanline_parity(edges, row_y, 0.5, 1.0, 20)
    np.testing.assert_array_equal(a, b)


def test_scanline_square():
    edges = np.array([[2, 2, 6, 2], [6, 2, 6, 6], [6, 6, 2, 6], [2, 6, 2, 2]], float)
    row_y = np.arange(8) + 0.5
    m = kernels.scanline_parity(edges, row_y, 0.5, 1.0, 8)
    assert m.sum() == 16 and m[2:6, 2:6].all()
