"""Hot inner loops, compiled when available.

The Cython extension ``_ckernels`` is used when it was built; otherwise the
numpy implementations in ``_pykernels`` are used. Set ``SARCUBE_KERNELS=python``
to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SARCUBE_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        _impl = _ckernels
        BACKEND = "cython"


def available_backends():
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out


def _c(a):
    return np.ascontiguousarray(a)


def im2col(x, kh, kw, stride=1):
    return _impl.im2col(_c(x), kh, kw, stride)


def col2im(cols, shape, kh, kw, stride=1):
    return _impl.col2im(_c(cols), tuple(shape), kh, kw, stride)


def maxpool2_forward(x):
    return _impl.maxpool2_forward(_c(x))


def maxpool2_backward(grad, idx, shape):
    return _impl.maxpool2_backward(_c(grad), _c(idx), tuple(shape))


def upsample2_backward(grad):
    return _impl.upsample2_backward(_c(grad))


def scanline_parity(edges, row_y, col0, col_step, width):
    edges = np.ascontiguousarray(edges, dtype=np.float64).reshape(-1, 4)
    row_y = np.ascontiguousarray(row_y, dtype=np.float64)
    return _impl.scanline_parity(edges, row_y, float(col0), float(col_step), int(width))
