# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inf-convolution core.

Mirrors _infconv_np operation-for-operation so both backends return bitwise
identical results (same IEEE operation order, first-minimum tie-breaking).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, isfinite, sqrt

cnp.import_array()


cdef inline double _eval(int kind, double p0, double p1, double p2,
                         double x, double y) nogil:
    cdef double d = x - y
    if kind == 0:
        return p0 * d * d + p1 * (x + y) - p2
    return p0 * ((x * x + y * y) * p1 - 2.0 * x * y)


cdef inline double _interp_f(double y, double ya, double ym, double yb,
                             double fa, double fm, double fb) nogil:
    if y <= ym:
        return fa + (y - ya) * (fm - fa) / (ym - ya)
    return fm + (y - ym) * (fb - fm) / (yb - ym)


def infconv_closed_1d(const double[::1] f, const double[::1] x_out, const double[::1] y_in,
                      int kind, double p0, double p1, double p2,
                      bint refine, int refine_iters):
    cdef Py_ssize_t n_out = x_out.shape[0]
    cdef Py_ssize_t n_in = y_in.shape[0]
    out_arr = np.empty(n_out)
    cdef double[::1] out = out_arr
    cdef double invphi = (sqrt(5.0) - 1.0) / 2.0
    cdef Py_ssize_t i, j, jbest
    cdef double best, v, xo
    cdef double ya, ym, yb, fa, fm, fb, a, b, c, d, hc, hd, ybest, cand
    cdef int it

    with nogil:
        for i in range(n_out):
            xo = x_out[i]
            best = INFINITY
            jbest = 0
            for j in range(n_in):
                v = f[j] + _eval(kind, p0, p1, p2, xo, y_in[j])
                if v < best:
                    best = v
                    jbest = j
            out[i] = best

            if refine and 1 <= jbest <= n_in - 2:
                fa = f[jbest - 1]
                fm = f[jbest]
                fb = f[jbest + 1]
                if isfinite(fa) and isfinite(fm) and isfinite(fb):
                    ya = y_in[jbest - 1]
                    ym = y_in[jbest]
                    yb = y_in[jbest + 1]
                    a = ya
                    b = yb
                    for it in range(refine_iters):
                        c = b - invphi * (b - a)
                        d = a + invphi * (b - a)
                        hc = _interp_f(c, ya, ym, yb, fa, fm, fb) + _eval(kind, p0, p1, p2, xo, c)
                        hd = _interp_f(d, ya, ym, yb, fa, fm, fb) + _eval(kind, p0, p1, p2, xo, d)
                        if hc < hd:
                            b = d
                        else:
                            a = c
                    ybest = 0.5 * (a + b)
                    cand = _interp_f(ybest, ya, ym, yb, fa, fm, fb) + _eval(kind, p0, p1, p2, xo, ybest)
                    if cand < out[i]:
                        out[i] = cand
    return out_arr
