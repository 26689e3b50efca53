"""Hot array kernels with a runtime-selected backend.

At import time the compiled Cython extension is preferred when it was built;
otherwise the pure numpy fallback takes over transparently.  The environment
variable ``TAXONET_KERNELS`` forces a backend (``numpy`` or ``cython``), and
:func:`use_backend` switches at runtime, which the benchmark and the
backend-equivalence tests rely on.

Both backends honour identical contracts (see ``_numpy_impl``); within one
process the active backend is fixed unless explicitly switched, so seeded
runs stay reproducible.
"""

import os

import numpy as np

from ..exceptions import ArgumentError
from . import _numpy_impl

try:
    from . import _ckernels as _cython_impl
except ImportError:  # extension not built
    _cython_impl = None

_IMPLS = {"numpy": _numpy_impl, "cython": _cython_impl}


def _initial_backend() -> str:
    forced = os.environ.get("TAXONET_KERNELS", "").strip().lower()
    if forced:
        if forced not in _IMPLS:
            raise ImportError(f"TAXONET_KERNELS={forced!r}: unknown backend")
        if _IMPLS[forced] is None:
            raise ImportError(
                "TAXONET_KERNELS=cython but the compiled extension is not available"
            )
        return forced
    return "cython" if _cython_impl is not None else "numpy"


_active_name = _initial_backend()
_active = _IMPLS[_active_name]


def active_backend() -> str:
    return _active_name


def available_backends() -> tuple[str, ...]:
    return tuple(name for name, impl in _IMPLS.items() if impl is not None)


def use_backend(name: str) -> None:
    """Switch the kernel backend (mainly for benchmarks and tests)."""
    global _active, _active_name
    if name not in _IMPLS:
        raise ArgumentError(f"unknown kernel backend {name!r}")
    if _IMPLS[name] is None:
        raise ArgumentError(f"kernel backend {name!r} is not available")
    _active_name = name
    _active = _IMPLS[name]


def _as_real(a, like=None):
    a = np.asarray(a)
    if a.dtype not in (np.float32, np.float64):
        a = a.astype(np.float32 if like is None else like.dtype)
    return np.ascontiguousarray(a)


def conv2d_forward(x, weight, bias, pad):
    """Stride-1 cross-correlation with symmetric zero padding."""
    x = _as_real(x)
    weight = _as_real(weight, x)
    bias = _as_real(bias, x)
    return _active.conv2d_forward(x, weight, bias, int(pad))


def conv2d_backward(x, weight, grad_out, pad, need_gx=True):
    """Gradients of conv2d_forward: (grad_x or None, grad_weight, grad_bias)."""
    x = _as_real(x)
    weight = _as_real(weight, x)
    grad_out = _as_real(grad_out, x)
    return _active.conv2d_backward(x, weight, grad_out, int(pad), bool(need_gx))


def maxpool2d_forward(x, size):
    """Non-overlapping max pooling; returns (pooled, argmax window indices)."""
    if size < 1:
        raise ArgumentError("pool size must be >= 1")
    x = _as_real(x)
    return _active.maxpool2d_forward(x, int(size))


def maxpool2d_backward(grad_out, idx, x_shape, size):
    grad_out = _as_real(grad_out)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    return _active.maxpool2d_backward(grad_out, idx, tuple(x_shape), int(size))


def bilinear_resize(img, out_h, out_w):
    """Resize an H x W x C array with half-pixel-center bilinear sampling."""
    if out_h < 1 or out_w < 1:
        raise ArgumentError("target size must be positive")
    img = _as_real(img)
    return _active.bilinear_resize(img, int(out_h), int(out_w))
