"""Backend selection for the distance kernel.

The compiled extension is used when it was built; otherwise the numpy
fallback.  Set ``TACTILE_DOME_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py.l1_distances

if os.environ.get("TACTILE_DOME_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled.l1_distances
        BACKEND = "cython"


def l1_distances(X, Y) -> np.ndarray:
    """Pairwise L1 distances, shape (len(X), len(Y))."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2:
        raise ValueError("l1_distances expects 2-D arrays")
    return _impl(X, Y)
