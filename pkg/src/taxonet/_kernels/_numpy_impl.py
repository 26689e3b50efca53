"""Pure numpy implementations of the hot array kernels.

Contracts (shared with the compiled backend in ``_ckernels.pyx``):

* conv2d is stride-1 cross-correlation with symmetric zero padding;
* maxpool2d is non-overlapping (window == stride) and resolves ties to the
  first element in row-major window order;
* bilinear_resize uses half-pixel-center source coordinates clamped at the
  borders (the common ``align_corners=False`` convention).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_forward(x, weight, bias, pad):
    b, cin, h, w = x.shape
    cout, _, kh, kw = weight.shape
    oh = h + 2 * pad - kh + 1
    ow = w + 2 * pad - kw + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # (B,Cin,OH,OW,kh,kw)
    cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(b * oh * ow, cin * kh * kw)
    out = cols @ weight.reshape(cout, -1).T
    out += bias
    return np.ascontiguousarray(out.reshape(b, oh, ow, cout).transpose(0, 3, 1, 2))


def conv2d_backward(x, weight, grad_out, pad, need_gx=True):
    b, cin, h, w = x.shape
    cout, _, kh, kw = weight.shape
    oh, ow = grad_out.shape[2], grad_out.shape[3]

    grad_bias = grad_out.sum(axis=(0, 2, 3))

    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(b * oh * ow, cin * kh * kw)
    gflat = grad_out.transpose(0, 2, 3, 1).reshape(b * oh * ow, cout)
    grad_weight = (gflat.T @ cols).reshape(cout, cin, kh, kw)

    grad_x = None
    if need_gx:
        # Input gradient is the full correlation of grad_out with the
        # 180-degree-rotated kernel, channel axes swapped.
        wt = np.ascontiguousarray(weight[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
        zeros = np.zeros(cin, dtype=x.dtype)
        gxp = conv2d_forward(grad_out, wt, zeros, pad=kh - 1)
        grad_x = np.ascontiguousarray(gxp[:, :, pad:pad + h, pad:pad + w])
    return grad_x, grad_weight, grad_bias


def maxpool2d_forward(x, size):
    b, c, h, w = x.shape
    oh, ow = h // size, w // size
    win = sliding_window_view(x, (size, size), axis=(2, 3))[:, :, ::size, ::size]
    flat = np.ascontiguousarray(win).reshape(b, c, oh, ow, size * size)
    idx = flat.argmax(axis=-1).astype(np.int64)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), idx


def maxpool2d_backward(grad_out, idx, x_shape, size):
    b, c, h, w = x_shape
    oh, ow = h // size, w // size
    gwin = np.zeros((b, c, oh, ow, size * size), dtype=grad_out.dtype)
    np.put_along_axis(gwin, idx[..., None], grad_out[..., None], axis=-1)
    gwin = gwin.reshape(b, c, oh, ow, size, size).transpose(0, 1, 2, 4, 3, 5)
    grad_x = np.zeros(x_shape, dtype=grad_out.dtype)
    grad_x[:, :, :oh * size, :ow * size] = gwin.reshape(b, c, oh * size, ow * size)
    return grad_x


def _linear_coords(n_src, n_dst):
    scale = n_src / n_dst
    src = (np.arange(n_dst, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_src - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i0 = np.minimum(i0, n_src - 1)
    i1 = np.minimum(i0 + 1, n_src - 1)
    frac = src - i0
    return i0, i1, frac


def bilinear_resize(img, out_h, out_w):
    h, w, _ = img.shape
    y0, y1, fy = _linear_coords(h, out_h)
    x0, x1, fx = _linear_coords(w, out_w)
    fy = fy.astype(img.dtype)[:, None, None]
    fx = fx.astype(img.dtype)[None, :, None]
    rows = img[y0] * (1 - fy) + img[y1] * fy          # (out_h, W, C)
    out = rows[:, x0] * (1 - fx) + rows[:, x1] * fx   # (out_h, out_w, C)
    return np.ascontiguousarray(out)
