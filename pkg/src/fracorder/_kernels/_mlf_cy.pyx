# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Mittag-Leffler summation kernels.

Contract identical to ``_mlf_py``; this twin runs the per-element term
loops as C code over double complex scalars.
"""

from libc.math cimport INFINITY, sqrt

cdef double _OVERFLOW = 1e290


cdef inline double cmag(double complex v) nogil:
    return sqrt(v.real * v.real + v.imag * v.imag)


def series_sum(const double complex[::1] z, const double[::1] coef,
               double tol, const long[::1] kmin,
               double complex[::1] out, unsigned char[::1] status):
    """See ``_mlf_py.series_sum``."""
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t K = coef.shape[0]
    cdef Py_ssize_t i, k = 0
    cdef Py_ssize_t kused = 0
    cdef double complex s, zp, term, zi
    cdef double mag, smag
    cdef int small, stat
    cdef long kmin_i
    with nogil:
        for i in range(n):
            zi = z[i]
            kmin_i = kmin[i]
            s = 0
            zp = 1
            small = 0
            stat = 1
            for k in range(K):
                term = coef[k] * zp
                s = s + term
                mag = cmag(term)
                smag = cmag(s)
                if not (mag < _OVERFLOW and smag < _OVERFLOW and smag == smag):
                    stat = 2
                    break
                if mag < tol * (1.0 + smag):
                    small += 1
                    if small >= 2 and k >= kmin_i:
                        stat = 0
                        break
                else:
                    small = 0
                zp = zp * zi
            if k + 1 > kused:
                kused = k + 1
            status[i] = stat
            out[i] = s
    return kused


def asym_sum(const double complex[::1] z, const double[::1] coef,
             long kmax, bint stop_at_min, double complex[::1] out):
    """See ``_mlf_py.asym_sum``."""
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t K = coef.shape[0]
    cdef Py_ssize_t i, k, klim
    cdef double complex s, best, zinv, zp, term
    cdef double best_mag, mag
    cdef int tiny
    klim = kmax if kmax < K else K
    with nogil:
        for i in range(n):
            s = 0
            best = 0
            best_mag = INFINITY
            zinv = 1.0 / z[i]
            zp = 1
            tiny = 0
            for k in range(1, klim + 1):
                zp = zp * zinv
                if zp == 0:
                    break
                term = -coef[k - 1] * zp
                mag = cmag(term)
                if stop_at_min:
                    if mag > 1e290:
                        break
                    s = s + term
                    if 0.0 < mag < best_mag:
                        best_mag = mag
                        best = s
                    if mag < 2.3e-17 * (1.0 + cmag(s)):
                        tiny += 1
                        if tiny >= 2:
                            break
                    else:
                        tiny = 0
                else:
                    s = s + term
            out[i] = best if stop_at_min else s
    return None
