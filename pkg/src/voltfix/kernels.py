"""Hot-loop kernels, compiled when available.

The Cython extension ``voltfix._kernels`` is used if it was built; otherwise
(or when ``VOLTFIX_PURE_PYTHON=1``) the numpy versions are used. ``BACKEND``
names the active implementation.
"""

import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("VOLTFIX_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("compiled kernels disabled by VOLTFIX_PURE_PYTHON")
    from . import _kernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _fallback
    BACKEND = "python"


def tri_rowsum(G, h, simpson=False, backend=None):
    impl = _select(backend)
    return impl.tri_rowsum(np.ascontiguousarray(G, dtype=np.float64), float(h), bool(simpson))


def window_modulus(X, w, backend=None):
    impl = _select(backend)
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    return impl.window_modulus(X, int(w))


weight_matrix = _fallback.weight_matrix


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _fallback
    if backend == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {backend!r}")
