"""Pure-numpy fallback for the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def l1_distances(X, Y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("feature dimensions differ")
    out = np.zeros((X.shape[0], Y.shape[0]))
    if X.shape[1] == 0:
        return out
    # feature-ordered accumulation, matches the compiled loop bit for bit
    out = np.abs(X[:, 0, None] - Y[None, :, 0])
    for k in range(1, X.shape[1]):
        out += np.abs(X[:, k, None] - Y[None, :, k])
    return out
