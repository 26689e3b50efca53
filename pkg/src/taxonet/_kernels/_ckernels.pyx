# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for convolution, pooling, and bilinear resize.

Mirrors the contracts of ``_numpy_impl`` exactly (padding, tie-breaking and
coordinate conventions); only summation order may differ, so float32 results
can disagree with the fallback at rounding level.
"""

import numpy as np

cimport cython
from libc.math cimport floor


ctypedef fused real:
    float
    double


def conv2d_forward(real[:, :, :, ::1] x, real[:, :, :, ::1] weight,
                   real[::1] bias, int pad):
    cdef Py_ssize_t b = x.shape[0], cin = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t cout = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3]
    cdef Py_ssize_t oh = h + 2 * pad - kh + 1
    cdef Py_ssize_t ow = w + 2 * pad - kw + 1
    if real is float:
        out_arr = np.zeros((b, cout, oh, ow), dtype=np.float32)
    else:
        out_arr = np.zeros((b, cout, oh, ow), dtype=np.float64)
    cdef real[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t bi, co, ci, i, j, oy, ox, oy0, oy1, ox0, ox1, sy, sx
    cdef real wv, bv
    with nogil:
        for bi in range(b):
            for co in range(cout):
                bv = bias[co]
                for oy in range(oh):
                    for ox in range(ow):
                        out[bi, co, oy, ox] = bv
                for ci in range(cin):
                    for i in range(kh):
                        oy0 = pad - i if pad - i > 0 else 0
                        oy1 = h + pad - i if h + pad - i < oh else oh
                        for j in range(kw):
                            wv = weight[co, ci, i, j]
                            if wv == 0:
                                continue
                            ox0 = pad - j if pad - j > 0 else 0
                            ox1 = w + pad - j if w + pad - j < ow else ow
                            sy = i - pad
                            sx = j - pad
                            for oy in range(oy0, oy1):
                                for ox in range(ox0, ox1):
                                    out[bi, co, oy, ox] = out[bi, co, oy, ox] + wv * x[bi, ci, oy + sy, ox + sx]
    return out_arr


def conv2d_backward(real[:, :, :, ::1] x, real[:, :, :, ::1] weight,
                    real[:, :, :, ::1] grad_out, int pad, bint need_gx=True):
    cdef Py_ssize_t b = x.shape[0], cin = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t cout = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3]
    cdef Py_ssize_t oh = grad_out.shape[2], ow = grad_out.shape[3]

    if real is float:
        dt = np.float32
    else:
        dt = np.float64
    gw_arr = np.zeros((cout, cin, kh, kw), dtype=dt)
    gb_arr = np.zeros((cout,), dtype=dt)
    cdef real[:, :, :, ::1] gw = gw_arr
    cdef real[::1] gb = gb_arr
    gx_arr = None
    cdef real[:, :, :, ::1] gx = None
    if need_gx:
        gx_arr = np.zeros((b, cin, h, w), dtype=dt)
        gx = gx_arr

    cdef Py_ssize_t bi, co, ci, i, j, oy, ox, oy0, oy1, ox0, ox1, sy, sx
    cdef real acc, gv, wv
    with nogil:
        for bi in range(b):
            for co in range(cout):
                acc = 0
                for oy in range(oh):
                    for ox in range(ow):
                        acc = acc + grad_out[bi, co, oy, ox]
                gb[co] = gb[co] + acc
                for ci in range(cin):
                    for i in range(kh):
                        oy0 = pad - i if pad - i > 0 else 0
                        oy1 = h + pad - i if h + pad - i < oh else oh
                        sy = i - pad
                        for j in range(kw):
                            ox0 = pad - j if pad - j > 0 else 0
                            ox1 = w + pad - j if w + pad - j < ow else ow
                            sx = j - pad
                            acc = 0
                            wv = weight[co, ci, i, j]
                            if need_gx:
                                for oy in range(oy0, oy1):
                                    for ox in range(ox0, ox1):
                                        gv = grad_out[bi, co, oy, ox]
                                        acc = acc + gv * x[bi, ci, oy + sy, ox + sx]
                                        gx[bi, ci, oy + sy, ox + sx] = gx[bi, ci, oy + sy, ox + sx] + gv * wv
                            else:
                                for oy in range(oy0, oy1):
                                    for ox in range(ox0, ox1):
                                        acc = acc + grad_out[bi, co, oy, ox] * x[bi, ci, oy + sy, ox + sx]
                            gw[co, ci, i, j] = gw[co, ci, i, j] + acc
    return gx_arr, gw_arr, gb_arr


def maxpool2d_forward(real[:, :, :, ::1] x, int size):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = h // size, ow = w // size
    if real is float:
        out_arr = np.zeros((b, c, oh, ow), dtype=np.float32)
    else:
        out_arr = np.zeros((b, c, oh, ow), dtype=np.float64)
    idx_arr = np.zeros((b, c, oh, ow), dtype=np.int64)
    cdef real[:, :, :, ::1] out = out_arr
    cdef long long[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t bi, ci, oy, ox, i, j, base_y, base_x
    cdef real best, v
    cdef long long best_k
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for oy in range(oh):
                    base_y = oy * size
                    for ox in range(ow):
                        base_x = ox * size
                        best = x[bi, ci, base_y, base_x]
                        best_k = 0
                        for i in range(size):
                            for j in range(size):
                                v = x[bi, ci, base_y + i, base_x + j]
                                if v > best:
                                    best = v
                                    best_k = i * size + j
                        out[bi, ci, oy, ox] = best
                        idx[bi, ci, oy, ox] = best_k
    return out_arr, idx_arr


def maxpool2d_backward(real[:, :, :, ::1] grad_out, long long[:, :, :, ::1] idx,
                       x_shape, int size):
    cdef Py_ssize_t b = grad_out.shape[0], c = grad_out.shape[1]
    cdef Py_ssize_t oh = grad_out.shape[2], ow = grad_out.shape[3]
    if real is float:
        gx_arr = np.zeros(tuple(x_shape), dtype=np.float32)
    else:
        gx_arr = np.zeros(tuple(x_shape), dtype=np.float64)
    cdef real[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t bi, ci, oy, ox
    cdef long long k
    with nogil:
        for bi in range(b):
            for ci in range(c):
                for oy in range(oh):
                    for ox in range(ow):
                        k = idx[bi, ci, oy, ox]
                        gx[bi, ci, oy * size + k // size, ox * size + k % size] = grad_out[bi, ci, oy, ox]
    return gx_arr


def bilinear_resize(real[:, :, ::1] img, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1], c = img.shape[2]
    if real is float:
        out_arr = np.zeros((out_h, out_w, c), dtype=np.float32)
    else:
        out_arr = np.zeros((out_h, out_w, c), dtype=np.float64)
    cdef real[:, :, ::1] out = out_arr

    y0_arr = np.zeros(out_h, dtype=np.int64)
    y1_arr = np.zeros(out_h, dtype=np.int64)
    fy_arr = np.zeros(out_h, dtype=np.float64)
    x0_arr = np.zeros(out_w, dtype=np.int64)
    x1_arr = np.zeros(out_w, dtype=np.int64)
    fx_arr = np.zeros(out_w, dtype=np.float64)
    _fill_coords(h, out_h, y0_arr, y1_arr, fy_arr)
    _fill_coords(w, out_w, x0_arr, x1_arr, fx_arr)
    cdef long long[::1] y0 = y0_arr, y1 = y1_arr, x0 = x0_arr, x1 = x1_arr
    cdef double[::1] fy = fy_arr, fx = fx_arr

    cdef Py_ssize_t oy, ox, ci
    cdef double wy, wx, top, bot
    with nogil:
        for oy in range(out_h):
            wy = fy[oy]
            for ox in range(out_w):
                wx = fx[ox]
                for ci in range(c):
                    top = img[y0[oy], x0[ox], ci] * (1 - wx) + img[y0[oy], x1[ox], ci] * wx
                    bot = img[y1[oy], x0[ox], ci] * (1 - wx) + img[y1[oy], x1[ox], ci] * wx
                    out[oy, ox, ci] = <real> (top * (1 - wy) + bot * wy)
    return out_arr


def _fill_coords(Py_ssize_t n_src, Py_ssize_t n_dst,
                 long long[::1] i0, long long[::1] i1, double[::1] frac):
    cdef double scale = <double> n_src / <double> n_dst
    cdef double src
    cdef Py_ssize_t k, lo
    for k in range(n_dst):
        src = (k + 0.5) * scale - 0.5
        if src < 0:
            src = 0
        if src > n_src - 1:
            src = n_src - 1
        lo = <Py_ssize_t> floor(src)
        if lo > n_src - 1:
            lo = n_src - 1
        i0[k] = lo
        i1[k] = lo + 1 if lo + 1 < n_src else n_src - 1
        frac[k] = src - lo
