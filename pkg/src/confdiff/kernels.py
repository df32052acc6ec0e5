"""Backend selection for the hot loops.

The compiled module is used when it was built; set ``CONFDIFF_PURE_PYTHON=1``
to force the numpy fallback. Both expose the same three functions.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("CONFDIFF_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"


def _c64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def logistic_margin(m, impl=None):
    return (impl or _impl).logistic_margin(_c64(m))


def confdiff_terms_rows(s, sp, c, prior, impl=None):
    return (impl or _impl).confdiff_terms_rows(_c64(s), _c64(sp), _c64(c), float(prior))


def confdiff_terms(s, sp, c, prior, impl=None):
    """(A, B, C, D) for a single batch, as a length-4 array."""
    return confdiff_terms_rows(
        _c64(s)[None, :], _c64(sp)[None, :], _c64(c)[None, :], prior, impl=impl
    )[0]


def confdiff_score_grad(s, sp, c, prior, weights, impl=None):
    wa, wb, wc, wd = (float(w) for w in weights)
    return (impl or _impl).confdiff_score_grad(
        _c64(s), _c64(sp), _c64(c), float(prior), wa, wb, wc, wd
    )


def available_backends():
    """Name -> module for every backend importable in this environment."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
