# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled L1 distance kernel.

Accumulates |x_k - y_k| in feature order, the same order as the numpy
fallback, so both paths give bit-identical results.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def l1_distances(const double[:, ::1] X, const double[:, ::1] Y):
    cdef Py_ssize_t m = X.shape[0], n = Y.shape[0], f = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc
    if Y.shape[1] != f:
        raise ValueError("feature dimensions differ")
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] D = out
    with nogil:
        for i in range(m):
            for j in range(n):
                acc = fabs(X[i, 0] - Y[j, 0]) if f > 0 else 0.0
                for k in range(1, f):
                    acc = acc + fabs(X[i, k] - Y[j, k])
                D[i, j] = acc
    return out
