# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernel.

Same accumulation order as the NumPy fallback (direction-major passes)
so results are bit-identical between backends.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def apply_stencil(const cnp.float64_t[::1] diag,
                  const cnp.int32_t[:, ::1] nbr_idx,
                  const cnp.float64_t[:, ::1] nbr_coef,
                  const cnp.float64_t[::1] x,
                  out=None):
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t ndir = nbr_idx.shape[0]
    if out is None:
        out = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] res = out
    cdef Py_ssize_t i, d
    cdef const cnp.int32_t[::1] idx_d
    cdef const cnp.float64_t[::1] coef_d
    with nogil:
        for i in range(n):
            res[i] = diag[i] * x[i]
    for d in range(ndir):
        idx_d = nbr_idx[d]
        coef_d = nbr_coef[d]
        with nogil:
            for i in range(n):
                res[i] = res[i] + coef_d[i] * x[idx_d[i]]
    return out
