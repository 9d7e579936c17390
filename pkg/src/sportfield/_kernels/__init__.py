"""Kernel backend selection.

The compiled extension is used when it imports; set
``SPORTFIELD_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

import numpy as np

from . import _pykernels as pykernels

try:
    if os.environ.get("SPORTFIELD_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _ckernels as ckernels
except ImportError:
    ckernels = None

_impl = ckernels if ckernels is not None else pykernels
BACKEND = "cython" if ckernels is not None else "python"


def _resolve(impl):
    if impl is None:
        return _impl
    if impl == "python":
        return pykernels
    if impl == "cython":
        if ckernels is None:
            raise ImportError("compiled kernels are not available")
        return ckernels
    return impl


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64).ravel()


def fuse_sources(tx, ty, conf, sigma, width, height, truncation, impl=None):
    impl = _resolve(impl)
    return impl.fuse_sources(
        _f64(tx), _f64(ty), _f64(conf), _f64(sigma), int(width), int(height), float(truncation)
    )


def assign_nearest(ex, ey, cx, cy, impl=None):
    impl = _resolve(impl)
    if len(cx) == 0:
        raise ValueError("no centres to assign to")
    return impl.assign_nearest(_f64(ex), _f64(ey), _f64(cx), _f64(cy))
