"""Sobolev, exponential-Gevrey and cosh-Gevrey norms of spectral fields.

All norms are the discrete weighted L2 norm
``sqrt(L**n * sum(|w(xi) c(xi)|**2))`` in the fixed transform normalization
of :mod:`beamgevrey.spectral`, so ``s = 0, sigma = 0`` gives exactly the
physical L2 norm. ``w`` is ``<xi>**s`` times ``cosh(sigma|xi|)``,
``exp(sigma|xi|)`` or 1, with ``<xi> = sqrt(1 + |xi|**2)``.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .spectral import LOG_ROUTE_THRESHOLD, OVERFLOW_CAP, OverflowCapError, logcosh

WEIGHTS = ("cosh", "exp", None)


@dataclass(frozen=True)
class NormSpec:
    sigma: float = 0.0
    s: float = 0.0
    weight: str = "cosh"

    def __post_init__(self):
        if self.weight not in WEIGHTS:
            raise ValueError(f"weight must be one of {WEIGHTS}, got {self.weight!r}")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")

    @property
    def is_sobolev(self):
        return self.weight is None or self.sigma == 0.0


def sobolev(s):
    return NormSpec(0.0, s, None)


def log_weight(grid, spec):
    out = 0.5 * spec.s * np.log1p(grid.xi_sq)
    if spec.is_sobolev:
        return out
    r = spec.sigma * grid.xi_abs
    return out + (logcosh(r) if spec.weight == "cosh" else r)


def _weight(grid, spec):
    w = (1.0 + grid.xi_sq) ** (0.5 * spec.s) if spec.s else 1.0
    if spec.is_sobolev:
        return w
    r = spec.sigma * grid.xi_abs
    return w * (np.cosh(r) if spec.weight == "cosh" else np.exp(r))


def _check_cap(grid, spec):
    if spec.is_sobolev:
        return 0.0
    reach = spec.sigma * grid.xi_max
    if reach > OVERFLOW_CAP:
        raise OverflowCapError(
            f"sigma*|xi_max| = {reach:.6g} exceeds the cap {OVERFLOW_CAP:g}")
    return reach


def log_weighted_norm(c, spec, route="auto"):
    """Natural log of :func:`weighted_norm` (``-inf`` for the zero field).

    ``route`` selects ``"direct"`` evaluation, the log-sum-exp ``"log"``
    reduction, or ``"auto"`` (log route once ``sigma|xi_max| > 300``).
    """
    grid = c.grid
    reach = _check_cap(grid, spec)
    if route == "auto":
        route = "log" if reach > LOG_ROUTE_THRESHOLD else "direct"
    n_log_l = grid.dim * np.log(grid.box_length)
    if route == "direct":
        w = _weight(grid, spec)
        total = (np.abs(w * c.coefficients) ** 2).sum()
        if total == 0.0:
            return -np.inf
        return 0.5 * (np.log(total) + n_log_l)
    if route != "log":
        raise ValueError(f"unknown route {route!r}")
    lw = np.ascontiguousarray(log_weight(grid, spec), dtype=float).ravel()
    absc = np.ascontiguousarray(np.abs(c.coefficients)).ravel()
    return 0.5 * (kernels.log_sum_sq(lw, absc) + n_log_l)


def weighted_norm(c, spec, route="auto"):
    if route == "direct" or (route == "auto" and spec.is_sobolev):
        grid = c.grid
        _check_cap(grid, spec)
        w = _weight(grid, spec)
        return float(np.sqrt(grid.box_length**grid.dim
                             * (np.abs(w * c.coefficients) ** 2).sum()))
    return float(np.exp(log_weighted_norm(c, spec, route)))


def cosh_norm(c, sigma, s):
    """``H^{sigma,s}`` norm (cosh weight)."""
    return weighted_norm(c, NormSpec(sigma, s, "cosh"))


def exp_norm(c, sigma, s):
    """``G^{sigma,s}`` norm (exponential weight)."""
    return weighted_norm(c, NormSpec(sigma, s, "exp"))


def norm_equivalence_margin(c, sigma, s):
    """Return ``(ratio, slack)`` for ratio = cosh-norm / exp-norm.

    The ratio lies in ``[1/2, 1]``; ``slack`` is its distance to the
    nearer end of that interval.
    """
    log_g = log_weighted_norm(c, NormSpec(sigma, s, "exp"))
    if log_g == -np.inf:
        raise ValueError("norm ratio undefined for the zero field")
    ratio = float(np.exp(log_weighted_norm(c, NormSpec(sigma, s, "cosh")) - log_g))
    return ratio, min(ratio - 0.5, 1.0 - ratio)


def cosh_deficit_rel(r, alpha):
    """``(r**(2 alpha) cosh r - (cosh r - 1)) / cosh r``, vectorized."""
    r = np.asarray(r, dtype=float)
    return np.power(r, 2.0 * np.asarray(alpha, dtype=float)) - 1.0 + 1.0 / np.cosh(r)


def cosh_deficit_bound_margin(r, alpha):
    """Margin ``r**(2 alpha) cosh r - (cosh r - 1)``; nonnegative for r >= 0, alpha in [0, 1].

    Uses the convention ``0**0 == 1``.
    """
    if r < 0 or not 0 <= alpha <= 1:
        raise ValueError("need r >= 0 and 0 <= alpha <= 1")
    ch = np.cosh(r)
    return float(ch * (r ** (2.0 * alpha) - 1.0) + 1.0)
