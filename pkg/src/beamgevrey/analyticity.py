"""Gevrey lift, modified energy, the cosh/sech residual and radius tracking."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .beam import energy, integrate, omega
from .norms import sobolev, weighted_norm
from .spectral import (
    MultiplierSpec,
    OverflowCapError,
    SpectralField,
    _check_odd,
    apply_multiplier,
    power_coefficients,
)

log = logging.getLogger(__name__)


class EstimatorError(ValueError):
    """The spectrum has too few usable modes for a decay fit."""


def gevrey_lift(st, sigma):
    """Apply ``cosh(sigma |D|)`` to both components of the state."""
    if sigma == 0.0:
        return st
    spec = MultiplierSpec.cosh_sigma(sigma)
    return st.replace(u=apply_multiplier(st.u, spec), ut=apply_multiplier(st.ut, spec))


@dataclass(frozen=True)
class ModifiedEnergyReport:
    sigma: float
    value: float
    kinetic: float
    bending: float
    mass: float
    potential: float
    time: float

    @property
    def parts(self):
        return (self.kinetic, self.bending, self.mass, self.potential)


def modified_energy(st, sigma):
    e = energy(gevrey_lift(st, sigma))
    return ModifiedEnergyReport(sigma, e.total, e.kinetic, e.bending, e.mass, e.potential,
                                e.time)


def np_residual(v, sigma, p):
    """``v^p - cosh(sigma|D|) [sech(sigma|D|) v]^p`` with dealiased powers."""
    p = _check_odd(p)
    grid = v.grid
    coeffs = np.asarray(v.coefficients)
    direct = power_coefficients(coeffs, grid, p)
    if sigma == 0.0:
        return SpectralField(grid, direct - power_coefficients(coeffs, grid, p))
    cosh = MultiplierSpec.cosh_sigma(sigma)
    sech = MultiplierSpec.sech_sigma(sigma)
    inner = apply_multiplier(v, sech).coefficients
    lifted = apply_multiplier(SpectralField(grid, power_coefficients(inner, grid, p)), cosh)
    return SpectralField(grid, direct - lifted.coefficients)


def residual_ratio(v, sigma, p):
    """``||N_p(v)||_{L2} / (sigma^2 ||v||_{H^2}^p)``."""
    if sigma <= 0:
        raise ValueError("residual ratio needs sigma > 0")
    denom = weighted_norm(v, sobolev(2.0))
    if denom == 0.0:
        raise ValueError("residual ratio undefined for the zero field")
    return weighted_norm(np_residual(v, sigma, p), sobolev(0.0)) / (sigma**2 * denom**p)


def fit_lemma_constant(fields, sigma, p, quantile=0.95):
    """High quantile of :func:`residual_ratio` over a field corpus."""
    ratios = np.array([residual_ratio(v, sigma, p) for v in fields])
    return float(np.quantile(ratios, quantile)), ratios


# -- radius estimation --------------------------------------------------------

@dataclass(frozen=True)
class FitPolicy:
    """Knobs of the spectral-decay radius estimator.

    The fit window keeps radial bins whose amplitude lies below
    ``10**-top_decades`` of the peak and above ``noise_floor`` times the
    peak. ``sigma_cap`` defaults to ``log(1 / noise_floor) / |xi_max|``.
    Decay is flagged super-exponential when the local rate over the last
    third of the window exceeds ``superexp_ratio`` times the rate over the
    first third.
    """

    noise_floor: float = 1e-13
    top_decades: float = 1.0
    s: float = 0.0
    sigma_cap: float = None
    min_modes: int = 8
    superexp_ratio: float = 2.0

    def cap(self, grid):
        if self.sigma_cap is not None:
            return self.sigma_cap
        return float(np.log(1.0 / self.noise_floor) / grid.xi_max)


@dataclass(frozen=True)
class RadiusEstimate:
    sigma_est: float
    fit_window: tuple
    residual: float
    n_modes_used: int
    capped: bool
    fitted_rate: float = np.nan


def radial_profile(c):
    """Max modulus per radial shell of width ``2 pi / L``.

    Returns ``(xi, amp)`` sorted by ``xi``, where ``xi`` is the |xi| of the
    maximizing mode in each shell.
    """
    grid = c.grid
    amp = np.abs(c.coefficients).ravel()
    xi = grid.xi_abs.ravel()
    shell = np.rint(xi / grid.dk).astype(np.int64)
    order = np.lexsort((-amp, shell))
    first = np.ones(len(order), dtype=bool)
    first[1:] = shell[order][1:] != shell[order][:-1]
    pick = order[first]
    return xi[pick], amp[pick]


def _rate(xi, y):
    design = np.column_stack([np.ones_like(xi), -xi])
    coef = np.linalg.lstsq(design, y, rcond=None)[0]
    return coef, y - design @ coef


def estimate_radius(c, policy=FitPolicy()):
    """Fit ``log|c(xi)| = beta - sigma |xi| - s log<xi>`` over the decay window."""
    xi, amp = radial_profile(c)
    peak = amp.max()
    if peak == 0.0:
        raise EstimatorError("zero field has no decay rate")
    upper = peak * 10.0 ** (-policy.top_decades)
    keep = (amp > policy.noise_floor * peak) & (amp < upper)
    n = int(keep.sum())
    if n < policy.min_modes:
        raise EstimatorError(f"only {n} usable modes in the fit window (need {policy.min_modes})")
    xw = xi[keep]
    y = np.log(amp[keep]) + policy.s * 0.5 * np.log1p(xw**2)
    (beta, rate), res = _rate(xw, y)
    residual = float(np.sqrt(np.mean(res**2)))
    third = max(n // 3, 2)
    near = _rate(xw[:third], y[:third])[0][1]
    far = _rate(xw[-third:], y[-third:])[0][1]
    superexp = near > 0 and far > policy.superexp_ratio * near
    cap = policy.cap(c.grid)
    window = (float(xw[0]), float(xw[-1]))
    if superexp:
        return RadiusEstimate(cap, window, residual, n, True, float(rate))
    return RadiusEstimate(float(rate), window, residual, n, False, float(rate))


def mode_amplitude(st):
    """``sqrt(|u|^2 + |u_t|^2 / w^2)`` per mode: invariant under the linear flow."""
    w = omega(st.grid, st.m)
    amp = np.sqrt(np.abs(st.u.coefficients) ** 2 + np.abs(st.ut.coefficients / w) ** 2)
    return SpectralField(st.grid, amp)


# -- drift sweep --------------------------------------------------------------

@dataclass(frozen=True)
class DriftRow:
    sigma: float
    delta: float
    sup_drift: float
    ratio: float
    valid: bool = True


@dataclass
class DriftTable:
    rows: list
    slope: float
    intercept: float
    checkpoint_spacing: float

    @property
    def ratio_spread(self):
        r = [row.ratio for row in self.rows if row.valid and row.sigma > 0]
        return max(r) / min(r) if r else np.nan


def _drift_row(states, sigma, delta, p):
    try:
        values = np.array([modified_energy(s, sigma).value for s in states])
    except OverflowCapError as exc:
        log.warning("sigma=%g row invalid: %s", sigma, exc)
        return DriftRow(sigma, delta, np.nan, np.nan, False)
    sup = float(np.abs(values - values[0]).max())
    if sigma > 0:
        ratio = sup / (delta * sigma**2 * values[0] ** ((p + 1) / 2))
    else:
        ratio = np.nan
    return DriftRow(sigma, delta, sup, float(ratio))


def sigma_drift_sweep(traj, sigmas, delta_window, workers=1):
    """Sup over checkpoints in ``[t0, t0 + delta]`` of ``|E_sigma(t) - E_sigma(t0)|``.

    One row per sigma (strictly increasing), with the normalized ratio
    ``sup_drift / (delta sigma^2 E_sigma(t0)^((p+1)/2))`` and the log-log
    slope of ``sup_drift`` against ``sigma``.
    """
    sigmas = [float(s) for s in sigmas]
    if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise ValueError("sigmas must be strictly increasing")
    t0 = traj.states[0].time
    states = [s for s in traj.states if s.time - t0 <= delta_window * (1 + 1e-12)]
    if states[-1].time - t0 < delta_window * (1 - 1e-9):
        raise ValueError("trajectory does not cover the drift window")
    p = states[0].p
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda s: _drift_row(states, s, delta_window, p), sigmas))
    else:
        rows = [_drift_row(states, s, delta_window, p) for s in sigmas]
    fit = [(r.sigma, r.sup_drift) for r in rows if r.valid and r.sigma > 0 and r.sup_drift > 0]
    if len(fit) >= 2:
        x, y = np.log(np.array(fit)).T
        slope, intercept = np.polyfit(x, y, 1)
    else:
        slope = intercept = np.nan
    spacing = float(np.diff([s.time for s in states]).max()) if len(states) > 1 else 0.0
    return DriftTable(rows, float(slope), float(intercept), spacing)


# -- radius over time ---------------------------------------------------------

def continuation_radius(T, E0, C_fit, p, sigma0):
    """``min(sigma0, sqrt((2 E0)^((1-p)/2) / (C_fit T)))``."""
    if not (T > 0 and E0 > 0 and C_fit > 0):
        raise ValueError("need T > 0, E0 > 0 and C_fit > 0")
    return float(min(sigma0, np.sqrt((2.0 * E0) ** ((1 - p) / 2) / (C_fit * T))))


@dataclass
class RadiusSeries:
    times: np.ndarray
    estimates: list
    errors: dict
    sigma0: float
    E0: float
    C_fit: float
    c_hat: float
    gamma: float
    c_powerlaw: float
    bounds: np.ndarray
    verdict: bool
    energies: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def lower_bound_curve(times, sigma0, c_hat):
    t = np.asarray(times, dtype=float)
    with np.errstate(divide="ignore"):
        branch = np.where(t > 0, c_hat / np.sqrt(np.where(t > 0, t, 1.0)), np.inf)
    return np.minimum(sigma0, branch)


def track_radius_over_time(config, workers=1):
    """Integrate ``config`` and estimate the radius at every output time.

    The lower-bound curve ``min(sigma0, c_hat t^-1/2)`` uses
    ``c_hat = sqrt((2 E0)^((1-p)/2) / C_fit)``, with ``E0`` the modified
    energy at ``sigma0`` and ``C_fit`` the high-quantile residual ratio
    over the config's random-field corpus.
    """
    st0 = config.initial_state()
    grid = st0.grid
    an = config.analyticity
    sigma0 = config.sigma0()
    traj = config.integrate(st0)
    policy = an.fit_policy()
    estimates, errors = [], {}
    for j, s in enumerate(traj.states):
        try:
            estimates.append(estimate_radius(mode_amplitude(s), policy))
        except EstimatorError as exc:
            estimates.append(None)
            errors[j] = str(exc)
    times = traj.times
    E0 = modified_energy(st0, sigma0).value
    C_fit = config.lemma_constant(grid, st0.p, workers=workers)
    c_hat = continuation_radius(1.0, E0, C_fit, st0.p, np.inf)
    bounds = lower_bound_curve(times, sigma0, c_hat)
    ok = [e is not None and e.sigma_est >= b for e, b in zip(estimates, bounds)]
    late = [(t, e.sigma_est) for t, e in zip(times, estimates) if e is not None and t > 0]
    if len(late) >= 2:
        lt, ls = np.log(np.array(late)).T
        slope, icpt = np.polyfit(lt, ls, 1)
        gamma, c_pl = float(-slope), float(np.exp(icpt))
    else:
        gamma = c_pl = np.nan
    return RadiusSeries(times, estimates, errors, sigma0, E0, C_fit, c_hat, gamma, c_pl,
                        bounds, bool(all(ok)), traj.energies(), traj.warnings)
