"""Pure numpy versions of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(x, kh, kw, stride):
    """(N, C, H, W) padded input -> (N, C*kh*kw, OH*OW) patch matrix."""
    n, c, h, w = x.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    # win: (N, C, OH, OW, kh, kw)
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, oh * ow)
    return np.ascontiguousarray(cols)


def col2im(cols, shape, kh, kw, stride):
    """Adjoint of :func:`im2col`: scatter-add patches back into ``shape``."""
    n, c, h, w = shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    out = np.zeros(shape, dtype=cols.dtype)
    cols = cols.reshape(n, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += cols[:, :, i, j]
    return out


def maxpool2_forward(x):
    """2x2 stride-2 max pool. Returns (out, argmax) with argmax in 0..3.

    Ties go to the first maximum in row-major window order.
    """
    n, c, h, w = x.shape
    win = x[:, :, :h // 2 * 2, :w // 2 * 2].reshape(n, c, h // 2, 2, w // 2, 2)
    win = win.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1).astype(np.uint8)
    out = np.take_along_axis(win, idx[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(out), idx


def maxpool2_backward(grad, idx, shape):
    n, c, h, w = shape
    oh, ow = grad.shape[2], grad.shape[3]
    full = np.zeros((n, c, oh, ow, 4), dtype=grad.dtype)
    np.put_along_axis(full, idx[..., None].astype(np.intp), grad[..., None], axis=-1)
    full = full.reshape(n, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh * 2, ow * 2)
    out = np.zeros(shape, dtype=grad.dtype)
    out[:, :, :oh * 2, :ow * 2] = full
    return out


def upsample2_backward(grad):
    """Adjoint of nearest 2x upsampling: sum each 2x2 block."""
    n, c, h, w = grad.shape
    return grad.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


def scanline_parity(edges, row_y, col0, col_step, width):
    """Even-odd fill of one polygon onto a pixel grid.

    ``edges`` is (E, 4) of (x1, y1, x2, y2) in map units; ``row_y`` holds the
    map y of each row's pixel centers; column ``j`` has its center at
    ``col0 + j * col_step``. A pixel is inside when the number of edge
    crossings at or left of its center is odd. Edges count for a scanline when
    exactly one endpoint lies strictly above it (half-open rule).
    """
    height = row_y.shape[0]
    counts = np.zeros((height, width + 1), dtype=np.int32)
    if len(edges):
        x1, y1, x2, y2 = (edges[:, k][None, :] for k in range(4))
        yc = row_y[:, None]
        cross = (y1 > yc) != (y2 > yc)
        rows, cols = np.nonzero(cross)
        if rows.size:
            e = cols
            t = (row_y[rows] - edges[e, 1]) / (edges[e, 3] - edges[e, 1])
            xs = edges[e, 0] + t * (edges[e, 2] - edges[e, 0])
            start = np.ceil((xs - col0) / col_step)
            start = np.clip(start, 0, width).astype(np.intp)
            np.add.at(counts, (rows, start), 1)
    parity = np.cumsum(counts[:, :width], axis=1) & 1
    return parity.astype(np.uint8)
