# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Same contracts as :mod:`beamgevrey._pykernels`; see that module for the
mathematical definitions. All large-argument hyperbolic quantities are
rescaled by ``exp(-max argument)`` so nothing overflows below r = 700.
"""
import numpy as np

from libc.math cimport exp, expm1, log, log1p, sqrt, sinh, fabs, INFINITY

cdef double LN2 = 0.6931471805599453


cdef inline double _logcosh(double r) nogil:
    r = fabs(r)
    if r < 1.0:
        return log1p(2.0 * sinh(0.5 * r) * sinh(0.5 * r))
    return r + log1p(exp(-2.0 * r)) - LN2


def cosh_difference_rel(double[::1] a, double[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    rel_arr = np.empty(n)
    logdom_arr = np.empty(n)
    cdef double[::1] rel = rel_arr
    cdef double[::1] logdom = logdom_arr
    cdef double hi, lo, s, d, lhs, rhs, dom
    with nogil:
        for i in range(n):
            hi = fabs(a[i])
            lo = fabs(b[i])
            if lo > hi:
                hi, lo = lo, hi
            s = 0.5 * (hi + lo)
            d = 0.5 * (hi - lo)
            # |cosh hi - cosh lo| = 2 sinh(s) sinh(d), scaled by exp(-hi)
            lhs = 0.5 * expm1(-2.0 * s) * expm1(-2.0 * d)
            rhs = 2.0 * d * s * (0.5 * (1.0 + exp(-2.0 * hi))
                                 + 0.5 * (exp(lo - hi) + exp(-lo - hi)))
            dom = lhs if lhs > rhs else rhs
            if dom == 0.0:
                rel[i] = 0.0
                logdom[i] = -INFINITY
            else:
                rel[i] = (rhs - lhs) / dom
                logdom[i] = hi + log(dom)
    return rel_arr, logdom_arr


def product_identity_residual(double[:, ::1] r):
    cdef Py_ssize_t i, j, mask, ns = r.shape[0], p = r.shape[1]
    cdef Py_ssize_t nterms = 1 << (p - 1)
    out_arr = np.empty(ns)
    cdef double[::1] out = out_arr
    cdef double total, lhs, rhs, z
    with nogil:
        for i in range(ns):
            total = 0.0
            lhs = 1.0
            for j in range(p):
                total += r[i, j]
                lhs *= 0.5 * (1.0 + exp(-2.0 * r[i, j]))
            rhs = 0.0
            for mask in range(nterms):
                z = r[i, 0]
                for j in range(1, p):
                    if (mask >> (j - 1)) & 1:
                        z -= r[i, j]
                    else:
                        z += r[i, j]
                rhs += 0.5 * (exp(z - total) + exp(-z - total))
            rhs *= 2.0 ** (1 - p)
            out[i] = fabs(lhs - rhs) / lhs
    return out_arr


def product_sech_margins(double[:, :, ::1] xi):
    cdef Py_ssize_t i, j, k, ns = xi.shape[0], p = xi.shape[1], n = xi.shape[2]
    rel1_arr = np.empty(ns)
    rel2_arr = np.empty(ns)
    lhs_arr = np.empty(ns)
    cdef double[::1] rel1 = rel1_arr
    cdef double[::1] rel2 = rel2_arr
    cdef double[::1] lhs_out = lhs_arr
    cdef double acc, rj, big1, big2, pairs, prefix, logterm, lhs, rhs1, rhs2, dom
    cdef double pow2p = 2.0 ** p
    cdef double total[3]
    with nogil:
        for i in range(ns):
            for k in range(n):
                total[k] = 0.0
            logterm = 0.0
            big1 = 0.0
            big2 = 0.0
            pairs = 0.0
            prefix = 0.0
            for j in range(p):
                acc = 0.0
                for k in range(n):
                    acc += xi[i, j, k] * xi[i, j, k]
                    total[k] += xi[i, j, k]
                rj = sqrt(acc)
                logterm -= _logcosh(rj)
                pairs += rj * prefix
                prefix += rj
                if rj > big1:
                    big2 = big1
                    big1 = rj
                elif rj > big2:
                    big2 = rj
            acc = 0.0
            for k in range(n):
                acc += total[k] * total[k]
            logterm += _logcosh(sqrt(acc))
            lhs = fabs(expm1(logterm))
            # ordered pairs j != k
            rhs1 = pow2p * 2.0 * pairs
            rhs2 = p * p * pow2p * big1 * big2
            dom = lhs if lhs > rhs1 else rhs1
            rel1[i] = 0.0 if dom == 0.0 else (rhs1 - lhs) / dom
            dom = lhs if lhs > rhs2 else rhs2
            rel2[i] = 0.0 if dom == 0.0 else (rhs2 - lhs) / dom
            lhs_out[i] = lhs
    return rel1_arr, rel2_arr, lhs_arr


def rotate_modes(double complex[::1] u, double complex[::1] v,
                 double[::1] c, double[::1] s_over_w, double[::1] w_s):
    cdef Py_ssize_t i, n = u.shape[0]
    cdef double complex ui
    with nogil:
        for i in range(n):
            ui = u[i]
            u[i] = c[i] * ui + s_over_w[i] * v[i]
            v[i] = c[i] * v[i] - w_s[i] * ui


def log_sum_sq(double[::1] logw, double[::1] absc):
    cdef Py_ssize_t i, n = logw.shape[0]
    cdef double m = -INFINITY, acc = 0.0
    t_arr = np.empty(n)
    cdef double[::1] t = t_arr
    with nogil:
        for i in range(n):
            if absc[i] > 0.0:
                t[i] = 2.0 * (logw[i] + log(absc[i]))
                if t[i] > m:
                    m = t[i]
            else:
                t[i] = -INFINITY
        if m > -INFINITY:
            for i in range(n):
                if t[i] > -INFINITY:
                    acc += exp(t[i] - m)
    if m == -INFINITY:
        return -INFINITY
    return m + log(acc)
