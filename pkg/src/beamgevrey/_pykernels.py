"""Numpy implementations of the hot kernels.

This is the fallback used when the compiled ``_ckernels`` module is not
available (or when ``BEAMGEVREY_PURE_PYTHON=1``). Both backends implement
identical contracts:

cosh_difference_rel(a, b)
    Relative margin of ``|cosh b - cosh a| <= 1/2 |b^2 - a^2| (cosh a + cosh b)``
    and the log of the dominant side.
product_identity_residual(r)
    Relative residual of the signed-sum expansion of a product of cosh.
product_sech_margins(xi)
    Relative margins of the cosh/sech product bound (pairwise and
    two-largest forms) and the left-hand side.
rotate_modes(u, v, c, s_over_w, w_s)
    In-place exact linear beam flow on flattened coefficient arrays.
log_sum_sq(logw, absc)
    ``log(sum((w * |c|)**2))`` without overflow.
"""
import numpy as np

LN2 = np.log(2.0)


def _logcosh(r):
    r = np.abs(r)
    small = r < 1.0
    out = np.empty_like(r)
    sh = np.sinh(0.5 * r[small])
    out[small] = np.log1p(2.0 * sh * sh)
    rb = r[~small]
    out[~small] = rb + np.log1p(np.exp(-2.0 * rb)) - LN2
    return out


def cosh_difference_rel(a, b):
    a = np.abs(np.asarray(a, dtype=float))
    b = np.abs(np.asarray(b, dtype=float))
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    s = 0.5 * (hi + lo)
    d = 0.5 * (hi - lo)
    lhs = 0.5 * np.expm1(-2.0 * s) * np.expm1(-2.0 * d)
    rhs = 2.0 * d * s * (0.5 * (1.0 + np.exp(-2.0 * hi))
                         + 0.5 * (np.exp(lo - hi) + np.exp(-lo - hi)))
    dom = np.maximum(lhs, rhs)
    zero = dom == 0.0
    safe = np.where(zero, 1.0, dom)
    rel = np.where(zero, 0.0, (rhs - lhs) / safe)
    logdom = np.where(zero, -np.inf, hi + np.log(safe))
    return rel, logdom


def _sign_matrix(p):
    # row `mask`, column j>=1: -1 where bit (j-1) of mask is set
    masks = np.arange(1 << (p - 1))[:, None]
    bits = np.arange(p - 1)[None, :]
    signs = np.ones((1 << (p - 1), p))
    signs[:, 1:] = np.where((masks >> bits) & 1, -1.0, 1.0)
    return signs


def product_identity_residual(r):
    r = np.ascontiguousarray(r, dtype=float)
    p = r.shape[1]
    total = r.sum(axis=1, keepdims=True)
    lhs = np.prod(0.5 * (1.0 + np.exp(-2.0 * r)), axis=1)
    z = r @ _sign_matrix(p).T
    rhs = (0.5 * (np.exp(z - total) + np.exp(-z - total))).sum(axis=1)
    rhs *= 2.0 ** (1 - p)
    return np.abs(lhs - rhs) / lhs


def product_sech_margins(xi):
    xi = np.ascontiguousarray(xi, dtype=float)
    p = xi.shape[1]
    r = np.sqrt((xi * xi).sum(axis=2))
    big = np.sqrt((xi.sum(axis=1) ** 2).sum(axis=1))
    logterm = _logcosh(big) - _logcosh(r.ravel()).reshape(r.shape).sum(axis=1)
    lhs = np.abs(np.expm1(logterm))
    prefix = np.cumsum(r, axis=1) - r
    rhs1 = 2.0 ** p * 2.0 * (r * prefix).sum(axis=1)
    top = -np.sort(-r, axis=1)
    second = top[:, 1] if p > 1 else np.zeros(len(r))
    rhs2 = p * p * 2.0 ** p * top[:, 0] * second

    def rel(rhs):
        dom = np.maximum(lhs, rhs)
        return np.where(dom == 0.0, 0.0, (rhs - lhs) / np.where(dom == 0.0, 1.0, dom))

    return rel(rhs1), rel(rhs2), lhs


def rotate_modes(u, v, c, s_over_w, w_s):
    ui = u.copy()
    u *= c
    u += s_over_w * v
    v *= c
    v -= w_s * ui


def log_sum_sq(logw, absc):
    mask = absc > 0.0
    if not mask.any():
        return -np.inf
    t = 2.0 * (logw[mask] + np.log(absc[mask]))
    m = t.max()
    return float(m + np.log(np.exp(t - m).sum()))
