# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil

cnp.import_array()

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] x, int kh, int kw, int stride):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h - kh) // stride + 1
    cdef Py_ssize_t ow = (w - kw) // stride + 1
    dtype = np.float32 if real is float else np.float64
    out = np.empty((n, c * kh * kw, oh * ow), dtype=dtype)
    cdef real[:, :, ::1] cols = out
    cdef Py_ssize_t b, ch, i, j, oy, ox, row, base
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = (ch * kh + i) * kw + j
                        for oy in range(oh):
                            base = oy * ow
                            if stride == 1:
                                for ox in range(ow):
                                    cols[b, row, base + ox] = x[b, ch, oy + i, ox + j]
                            else:
                                for ox in range(ow):
                                    cols[b, row, base + ox] = x[b, ch, oy * stride + i, ox * stride + j]
    return out


def col2im(real[:, :, ::1] cols, shape, int kh, int kw, int stride):
    cdef Py_ssize_t n = shape[0], c = shape[1], h = shape[2], w = shape[3]
    cdef Py_ssize_t oh = (h - kh) // stride + 1
    cdef Py_ssize_t ow = (w - kw) // stride + 1
    dtype = np.float32 if real is float else np.float64
    res = np.zeros((n, c, h, w), dtype=dtype)
    cdef real[:, :, :, ::1] out = res
    cdef Py_ssize_t b, ch, i, j, oy, ox, row, base
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(kh):
                    for j in range(kw):
                        row = (ch * kh + i) * kw + j
                        for oy in range(oh):
                            base = oy * ow
                            for ox in range(ow):
                                out[b, ch, oy * stride + i, ox * stride + j] += cols[b, row, base + ox]
    return res


def maxpool2_forward(real[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t oh = x.shape[2] // 2, ow = x.shape[3] // 2
    dtype = np.float32 if real is float else np.float64
    res = np.empty((n, c, oh, ow), dtype=dtype)
    arg = np.empty((n, c, oh, ow), dtype=np.uint8)
    cdef real[:, :, :, ::1] out = res
    cdef cnp.uint8_t[:, :, :, ::1] idx = arg
    cdef Py_ssize_t b, ch, i, j
    cdef real best, v
    cdef cnp.uint8_t k
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(oh):
                    for j in range(ow):
                        best = x[b, ch, 2 * i, 2 * j]
                        k = 0
                        v = x[b, ch, 2 * i, 2 * j + 1]
                        if v > best:
                            best = v
                            k = 1
                        v = x[b, ch, 2 * i + 1, 2 * j]
                        if v > best:
                            best = v
                            k = 2
                        v = x[b, ch, 2 * i + 1, 2 * j + 1]
                        if v > best:
                            best = v
                            k = 3
                        out[b, ch, i, j] = best
                        idx[b, ch, i, j] = k
    return res, arg


def maxpool2_backward(real[:, :, :, ::1] grad, cnp.uint8_t[:, :, :, ::1] idx, shape):
    cdef Py_ssize_t n = grad.shape[0], c = grad.shape[1], oh = grad.shape[2], ow = grad.shape[3]
    dtype = np.float32 if real is float else np.float64
    res = np.zeros(tuple(shape), dtype=dtype)
    cdef real[:, :, :, ::1] out = res
    cdef Py_ssize_t b, ch, i, j
    cdef cnp.uint8_t k
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(oh):
                    for j in range(ow):
                        k = idx[b, ch, i, j]
                        out[b, ch, 2 * i + k // 2, 2 * j + k % 2] = grad[b, ch, i, j]
    return res


def upsample2_backward(real[:, :, :, ::1] grad):
    cdef Py_ssize_t n = grad.shape[0], c = grad.shape[1]
    cdef Py_ssize_t oh = grad.shape[2] // 2, ow = grad.shape[3] // 2
    dtype = np.float32 if real is float else np.float64
    res = np.empty((n, c, oh, ow), dtype=dtype)
    cdef real[:, :, :, ::1] out = res
    cdef Py_ssize_t b, ch, i, j
    with nogil:
        for b in range(n):
            for ch in range(c):
                for i in range(oh):
                    for j in range(ow):
                        # same pairing order as the numpy reshape-sum
                        out[b, ch, i, j] = ((grad[b, ch, 2 * i, 2 * j] + grad[b, ch, 2 * i + 1, 2 * j])
                                            + (grad[b, ch, 2 * i, 2 * j + 1] + grad[b, ch, 2 * i + 1, 2 * j + 1]))
    return res


def scanline_parity(double[:, ::1] edges, double[::1] row_y, double col0, double col_step,
                    Py_ssize_t width):
    cdef Py_ssize_t height = row_y.shape[0], ne = edges.shape[0]
    res = np.zeros((height, width), dtype=np.uint8)
    counts_arr = np.zeros(width + 1, dtype=np.int32)
    cdef cnp.uint8_t[:, ::1] out = res
    cdef int[::1] counts = counts_arr
    cdef Py_ssize_t r, e, j, start
    cdef double yc, x1, y1, x2, y2, xs, s
    cdef int acc
    with nogil:
        for r in range(height):
            yc = row_y[r]
            for j in range(width + 1):
                counts[j] = 0
            for e in range(ne):
                x1 = edges[e, 0]
                y1 = edges[e, 1]
                x2 = edges[e, 2]
                y2 = edges[e, 3]
                if (y1 > yc) != (y2 > yc):
                    xs = x1 + (yc - y1) / (y2 - y1) * (x2 - x1)
                    s = ceil((xs - col0) / col_step)
                    if s < 0:
                        start = 0
                    elif s > width:
                        start = width
                    else:
                        start = <Py_ssize_t>s
                    counts[start] += 1
            acc = 0
            for j in range(width):
                acc += counts[j]
                out[r, j] = acc & 1
    return res
