# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: segment phasor sums and the Monte-Carlo phase reduction.

Must match the NumPy implementations in ``_fallback.py``; the parity tests
hold the two to 1e-12 relative.
"""

from libc.math cimport cos, fabs, sin

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline double _sinc(double x) noexcept nogil:
    # sin(x)/x, series-stable near zero
    if fabs(x) < 1e-5:
        return 1.0 - x * x / 6.0
    return sin(x) / x


def segment_phasor_sq(omega, seg_len, seg_mid, seg_sign):
    """See ``_fallback.segment_phasor_sq``."""
    cdef double[::1] w = np.ascontiguousarray(omega, dtype=np.float64)
    cdef double[::1] ln = np.ascontiguousarray(seg_len, dtype=np.float64)
    cdef double[::1] mid = np.ascontiguousarray(seg_mid, dtype=np.float64)
    cdef double[::1] sg = np.ascontiguousarray(seg_sign, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0], nseg = ln.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double re, im, amp, ph, wi
    with nogil:
        for i in range(n):
            wi = w[i]
            re = 0.0
            im = 0.0
            for j in range(nseg):
                amp = sg[j] * ln[j] * _sinc(wi * ln[j] * 0.5)
                ph = wi * mid[j]
                re += amp * cos(ph)
                im += amp * sin(ph)
            out[i] = re * re + im * im
    return out_arr


def cycle_phase_signal(samples, weights, n_cyc, cycle_counts, alternate=False):
    """See ``_fallback.cycle_phase_signal``."""
    cdef double[:, ::1] E = np.ascontiguousarray(samples, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef long long[::1] counts = np.ascontiguousarray(cycle_counts, dtype=np.int64)
    cdef Py_ssize_t nc = n_cyc
    cdef bint alt = alternate
    cdef Py_ssize_t trials = E.shape[0], npts = counts.shape[0]
    cdef Py_ssize_t m_max = <Py_ssize_t> counts[npts - 1]
    sum_cos_arr = np.zeros(npts, dtype=np.float64)
    sum_sq_arr = np.zeros(npts, dtype=np.float64)
    cdef double[::1] sum_cos = sum_cos_arr
    cdef double[::1] sum_sq = sum_sq_arr
    cdef Py_ssize_t t, r, i, p, base
    cdef double acc, integral, c, sign
    with nogil:
        for t in range(trials):
            acc = 0.0
            sign = 1.0
            p = 0
            for r in range(m_max):
                base = r * nc
                integral = 0.0
                for i in range(nc + 1):
                    integral += w[i] * E[t, base + i]
                acc += sign * integral
                if alt:
                    sign = -sign
                if r + 1 == counts[p]:
                    c = cos(acc)
                    sum_cos[p] += c
                    sum_sq[p] += c * c
                    p += 1
                    if p == npts:
                        break
    return sum_cos_arr, sum_sq_arr
