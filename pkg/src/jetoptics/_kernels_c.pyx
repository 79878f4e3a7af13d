# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled truncated jet product."""

import numpy as np


def jet_bmm(const double[:, :, :, ::1] x, const double[:, :, :, ::1] y,
            const Py_ssize_t[::1] pa, const Py_ssize_t[::1] pb,
            const Py_ssize_t[::1] pc, starts, Py_ssize_t nmon):
    """out[b, i, k, c] = sum_j sum_{(a, a') -> c} x[b, i, j, a] y[b, j, k, a']."""
    cdef Py_ssize_t nb = x.shape[0], ni = x.shape[1], nj = x.shape[2]
    cdef Py_ssize_t nk = y.shape[2], npairs = pa.shape[0]
    cdef Py_ssize_t b, i, j, k, q
    out = np.zeros((nb, ni, nk, nmon))
    cdef double[:, :, :, ::1] o = out
    cdef const double* xr
    cdef const double* yr
    cdef double* orow
    cdef const Py_ssize_t* ia = &pa[0]
    cdef const Py_ssize_t* ib = &pb[0]
    cdef const Py_ssize_t* ic = &pc[0]
    if nb == 0 or ni == 0 or nj == 0 or nk == 0:
        return out
    with nogil:
        for b in range(nb):
            for i in range(ni):
                for j in range(nj):
                    xr = &x[b, i, j, 0]
                    for k in range(nk):
                        yr = &y[b, j, k, 0]
                        orow = &o[b, i, k, 0]
                        for q in range(npairs):
                            orow[ic[q]] += xr[ia[q]] * yr[ib[q]]
    return out
