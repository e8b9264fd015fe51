"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen at import time from ``FUNDUS_SCREEN_NUMBA``: unset or
``1`` uses numba when it imports, ``0`` forces numpy. Both backends are
bit-identical; the switch only changes speed.
"""
import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

try:
    from . import _numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAVE_NUMBA = False

KERNELS = ("blur_axis", "warp_bilinear", "resize_bilinear", "im2col", "col2im")

_impl = _numpy
reflect101_index = _numpy.reflect101_index


def set_backend(name):
    """Switch every kernel to ``"numba"`` or ``"numpy"``."""
    global _impl
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        _impl = _numba
    elif name == "numpy":
        _impl = _numpy
    else:
        raise ValueError(f"unknown kernel backend {name!r}")


def backend():
    return "numba" if _impl is _numba and _numba is not None else "numpy"


def implementation(name):
    """Module object for a backend, for side-by-side comparisons."""
    return {"numpy": _numpy, "numba": _numba}[name]


def blur_axis(x, kernel, axis):
    return _impl.blur_axis(x, kernel, axis)


def warp_bilinear(img, matrix):
    return _impl.warp_bilinear(img, matrix)


def resize_bilinear(img, out_h, out_w):
    return _impl.resize_bilinear(img, out_h, out_w)


def im2col(x, ksize, stride, pad):
    return _impl.im2col(x, ksize, stride, pad)


def col2im(cols, shape, ksize, stride, pad):
    return _impl.col2im(cols, shape, ksize, stride, pad)


_flag = os.environ.get("FUNDUS_SCREEN_NUMBA", "1").strip().lower()
if _flag in ("0", "false", "no", "off"):
    set_backend("numpy")
elif HAVE_NUMBA:
    set_backend("numba")
else:  # pragma: no cover
    log.warning("numba not importable; using numpy kernels")
