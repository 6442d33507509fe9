# cython: language_level=3
"""Compiled coordinate-descent sweep for the l1-penalized quadratic.

Mirrors :func:`lyaplasso._cd_fallback.cd_sweep` exactly; the two are
interchangeable and selected in :mod:`lyaplasso._kernels`.
"""
from libc.math cimport fabs


def cd_sweep(const double[:, ::1] gamma, double[::1] v, double[::1] grad,
             double lam, const Py_ssize_t[::1] coords):
    """Visit ``coords`` in order, minimizing exactly along each coordinate.

    ``grad`` must hold ``gamma @ v - g`` on entry and is kept in sync.
    Returns the largest absolute coordinate change.
    """
    cdef Py_ssize_t q = gamma.shape[0]
    cdef Py_ssize_t n = coords.shape[0]
    cdef Py_ssize_t a, k, j
    cdef double gkk, old, w, new, d
    cdef double dmax = 0.0

    with nogil:
        for a in range(n):
            k = coords[a]
            gkk = gamma[k, k]
            old = v[k]
            w = gkk * old - grad[k]
            if w > lam:
                new = (w - lam) / gkk
            elif w < -lam:
                new = (w + lam) / gkk
            else:
                new = 0.0
            d = new - old
            if d != 0.0:
                v[k] = new
                for j in range(q):
                    grad[j] += d * gamma[k, j]
                if fabs(d) > dmax:
                    dmax = fabs(d)
    return dmax
