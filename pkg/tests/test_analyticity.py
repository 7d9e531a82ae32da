import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from beamgevrey import config
from beamgevrey.analyticity import (
    EstimatorError,
    FitPolicy,
    continuation_radius,
    estimate_radius,
    fit_lemma_constant,
    gevrey_lift,
    lower_bound_curve,
    mode_amplitude,
    modified_energy,
    np_residual,
    radial_profile,
    residual_ratio,
    sigma_drift_sweep,
    track_radius_over_time,
)
from beamgevrey.beam import State, energy, integrate, linear_propagate
from beamgevrey.data import InitialDataSpec, build, periodic_lorentz
from beamgevrey.lemmas import Sampler
from beamgevrey.norms import sobolev, weighted_norm
from beamgevrey.spectral import (
    MultiplierSpec,
    RealField,
    SpectralField,
    apply_multiplier,
    forward_transform,
    make_grid,
    zero_nyquist,
)
from oracles import convolution_power, random_hermitian


def _state(grid, u, ut=None, **kw):
    ut = np.zeros(grid.shape) if ut is None else ut
    return State(SpectralField(grid, u), SpectralField(grid, ut), **kw)


def _lorentz(n=128, amp=1.0, a=0.5, dim=1, length=2 * np.pi):
    g = make_grid(dim, n, length)
    return State(build(InitialDataSpec("lorentz", amplitude=amp, a=a), g),
                 SpectralField(g, np.zeros(g.shape)))


# -- lift and modified energy ------------------------------------------------

def test_lift_zero_is_identity():
    st = _lorentz()
    assert gevrey_lift(st, 0.0) is st


def test_lift_single_mode():
    g = make_grid(1, 16, 2 * np.pi)
    c = np.zeros(16, dtype=complex)
    c[1] = c[-1] = 0.5
    lifted = gevrey_lift(_state(g, c, c), 1.0)
    assert lifted.u.coefficients[1].real == pytest.approx(0.5 * np.cosh(1.0), rel=1e-15)
    assert lifted.ut.coefficients[-1].real == pytest.approx(0.5 * np.cosh(1.0), rel=1e-15)


def test_lift_then_unlift(rng):
    g = make_grid(1, 64, 2 * np.pi)
    st = _state(g, random_hermitian(rng, g), random_hermitian(rng, g))
    sigma = 30.0 / g.xi_max
    lifted = gevrey_lift(st, sigma)
    back = apply_multiplier(lifted.u, MultiplierSpec.sech_sigma(sigma))
    assert np.abs(back.coefficients - st.u.coefficients).max() < 1e-12


def test_modified_energy_at_zero_is_energy_bitwise():
    st = _lorentz()
    e = energy(st)
    me = modified_energy(st, 0.0)
    assert me.value == e.total
    assert me.parts == (e.kinetic, e.bending, e.mass, e.potential)


def test_modified_energy_monotone_in_sigma():
    st = _lorentz()
    vals = [modified_energy(st, s).value for s in np.linspace(0, 0.45, 19)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_modified_energy_zero_state():
    g = make_grid(1, 16, 1.0)
    st = _state(g, np.zeros(16))
    assert all(modified_energy(st, s).value == 0.0 for s in (0.0, 0.5, 2.0))


# -- residual ---------------------------------------------------------------

def test_residual_vanishes_at_sigma_zero(rng):
    g = make_grid(1, 32, 2 * np.pi)
    v = SpectralField(g, random_hermitian(rng, g))
    assert not np_residual(v, 0.0, 3).coefficients.any()


def test_residual_vanishes_for_p1(rng):
    g = make_grid(1, 32, 2 * np.pi)
    v = SpectralField(g, random_hermitian(rng, g))
    r = np_residual(v, 0.3, 1).coefficients
    assert np.abs(r).max() < 1e-14 * np.abs(v.coefficients).max()


def test_residual_matches_convolution_oracle(rng):
    g = make_grid(1, 64, 2 * np.pi)
    sigma = 1e-2
    c = random_hermitian(rng, g, 0.1)
    sech = 1 / np.cosh(sigma * g.xi_abs)
    ref = convolution_power(c, 3) - np.cosh(sigma * g.xi_abs) * convolution_power(c * sech, 3)
    ref = zero_nyquist(ref, g)
    got = np_residual(SpectralField(g, c), sigma, 3).coefficients
    assert np.abs(got - ref).max() <= 1e-11 * np.abs(convolution_power(c, 3)).max()


def test_residual_ratio_single_mode_pair_closed_form():
    g = make_grid(1, 32, 2 * np.pi)
    k, amp, sigma = 2, 0.8, 0.05
    c = np.zeros(32, dtype=complex)
    c[k] = c[-k] = 0.5 * amp
    v = SpectralField(g, c)
    # cos^3 = (3 cos + cos 3x) / 4 and every factor sits at |xi| = k
    sp = 1 / np.cosh(sigma * k) ** 3
    n1 = 3 * amp**3 / 8 * (1 - np.cosh(sigma * k) * sp)
    n3 = amp**3 / 8 * (1 - np.cosh(3 * sigma * k) * sp)
    l2 = np.sqrt(2 * np.pi * 2 * (n1**2 + n3**2))
    h2 = np.sqrt(2 * np.pi * 2 * (0.5 * amp * (1 + k**2)) ** 2)
    assert residual_ratio(v, sigma, 3) == pytest.approx(l2 / (sigma**2 * h2**3), rel=1e-10)


def test_residual_ratio_plateau(rng):
    g = make_grid(1, 64, 2 * np.pi)
    v = SpectralField(g, random_hermitian(rng, g, 0.2))
    for sigma in (1e-2, 5e-3, 2e-3):
        a, b = residual_ratio(v, sigma, 3), residual_ratio(v, sigma / 2, 3)
        assert abs(a / b - 1) < 0.05


def test_residual_slope_is_two():
    g = make_grid(1, 64, 2 * np.pi)
    v = next(Sampler(3).fields(g, 8, 1))
    sig = np.logspace(-3, -2, 7)
    norms = [weighted_norm(np_residual(v, s, 3), sobolev(0.0)) for s in sig]
    slope = np.polyfit(np.log(sig), np.log(norms), 1)[0]
    assert abs(slope - 2.0) < 0.05


def test_residual_ratio_errors(rng):
    g = make_grid(1, 16, 1.0)
    v = SpectralField(g, random_hermitian(rng, g))
    with pytest.raises(ValueError):
        residual_ratio(v, 0.0, 3)
    with pytest.raises(ValueError):
        residual_ratio(SpectralField(g, np.zeros(16)), 0.1, 3)


def test_fit_lemma_constant_is_quantile():
    g = make_grid(1, 64, 2 * np.pi)
    fields = list(Sampler(0).fields(g, 8, 20))
    c, ratios = fit_lemma_constant(fields, 1e-2, 3)
    assert c == np.quantile(ratios, 0.95)
    assert ratios.min() > 0


# -- radius estimation --------------------------------------------------------

def test_synthetic_exponential_spectrum():
    g = make_grid(1, 256, 2 * np.pi)
    c = zero_nyquist(np.exp(-0.3 * g.xi_abs), g)
    est = estimate_radius(SpectralField(g, c))
    assert abs(est.sigma_est - 0.3) <= 1e-6
    assert est.residual < 1e-10
    assert not est.capped
    assert g.xi_abs.min() <= est.fit_window[0] < est.fit_window[1] <= g.xi_max


@given(scale=st.floats(1e-6, 1e6))
def test_estimate_scale_invariant(scale):
    g = make_grid(1, 256, 2 * np.pi)
    c = zero_nyquist(np.exp(-0.4 * g.xi_abs) * (1 + 0.1 * np.cos(g.xi_abs)), g)
    a = estimate_radius(SpectralField(g, c)).sigma_est
    b = estimate_radius(SpectralField(g, scale * c)).sigma_est
    assert b == pytest.approx(a, abs=1e-9)


def test_algebraic_prefactor_knob():
    g = make_grid(1, 256, 2 * np.pi)
    bracket = np.sqrt(1 + g.xi_sq)
    c = zero_nyquist(np.exp(-0.3 * g.xi_abs) * bracket**-1.5, g)
    est = estimate_radius(SpectralField(g, c), FitPolicy(s=1.5))
    assert abs(est.sigma_est - 0.3) < 1e-9


@pytest.mark.parametrize("a", [0.2, 0.35, 0.5, 0.75, 1.0])
def test_sampled_pole_profile(a):
    length = 40 * a
    g = make_grid(1, 512, length)
    x = g.coordinates - 0.5 * length
    values = periodic_lorentz(x, a, length)
    c = forward_transform(RealField(g, values))
    est = estimate_radius(c)
    assert abs(est.sigma_est - a) <= 0.05 * a
    assert not est.capped


@pytest.mark.parametrize("a", [0.2, 0.5, 1.0])
def test_pole_family_builder(a):
    g = make_grid(1, 256, 2 * np.pi)
    c = build(InitialDataSpec("lorentz", a=a), g)
    assert abs(estimate_radius(c).sigma_est - a) <= 1e-9


def test_pole_family_2d_radial_bins():
    g = make_grid(2, 128, 2 * np.pi)
    c = build(InitialDataSpec("lorentz", a=0.5), g)
    xi, amp = radial_profile(c)
    assert np.all(np.diff(xi) > 0)
    assert abs(estimate_radius(c).sigma_est - 0.5) < 0.01


def test_gaussian_is_capped():
    g = make_grid(1, 256, 40.0)
    c = build(InitialDataSpec("gaussian", width=1.0), g)
    pol = FitPolicy()
    est = estimate_radius(c, pol)
    assert est.capped
    assert est.sigma_est == pol.cap(g) == pytest.approx(np.log(1e13) / g.xi_max)


def test_too_few_modes():
    g = make_grid(1, 16, 2 * np.pi)
    c = zero_nyquist(np.exp(-0.3 * g.xi_abs), g)
    with pytest.raises(EstimatorError):
        estimate_radius(SpectralField(g, c))
    with pytest.raises(EstimatorError):
        estimate_radius(SpectralField(g, np.zeros(16)))


def test_mode_amplitude_invariant_under_linear_flow():
    st = _lorentz(n=256, a=0.4)
    moved = linear_propagate(st, 3.7)
    a, b = mode_amplitude(st).coefficients, mode_amplitude(moved).coefficients
    assert np.abs(a - b).max() < 1e-14
    assert estimate_radius(mode_amplitude(moved)).sigma_est == pytest.approx(0.4, abs=1e-9)


# -- drift sweep --------------------------------------------------------------

def test_linear_run_has_no_drift():
    st = dataclasses.replace(_lorentz(), coupling=0.0)
    traj = integrate(st, 1.0, 1e-2)
    table = sigma_drift_sweep(traj, [0.0, 1e-2, 0.1], 1.0)
    assert all(r.sup_drift < 1e-10 * modified_energy(st, r.sigma).value for r in table.rows)


def test_sigma_zero_row_is_energy_error():
    st = _lorentz(amp=0.5)
    traj = integrate(st, 0.5, 1e-3, output_stride=10)
    table = sigma_drift_sweep(traj, [0.0, 0.01], 0.5)
    e = [x.total for x in traj.energies()]
    assert table.rows[0].sup_drift == max(abs(v - e[0]) for v in e)


def test_sweep_validation():
    st = _lorentz(amp=0.5)
    traj = integrate(st, 0.2, 1e-2)
    with pytest.raises(ValueError):
        sigma_drift_sweep(traj, [0.1, 0.01], 0.2)
    with pytest.raises(ValueError):
        sigma_drift_sweep(traj, [0.01], 0.5)


def test_overflowing_row_marked_invalid():
    st = _lorentz(amp=0.5)
    traj = integrate(st, 0.1, 1e-2)
    table = sigma_drift_sweep(traj, [0.01, 0.02, 20.0], 0.1, workers=2)
    assert [r.valid for r in table.rows] == [True, True, False]
    assert np.isfinite(table.slope)


def test_sweep_workers_do_not_change_result():
    st = _lorentz(amp=0.5)
    traj = integrate(st, 0.2, 1e-3, output_stride=5)
    sig = [1e-3, 1e-2, 1e-1]
    a = sigma_drift_sweep(traj, sig, 0.2, workers=1)
    b = sigma_drift_sweep(traj, sig, 0.2, workers=3)
    assert a.rows == b.rows and a.slope == b.slope


def test_drift_scales_with_sigma_squared():
    st = _lorentz(amp=1.0)
    traj = integrate(st, 0.5, 1e-4, output_stride=10)
    table = sigma_drift_sweep(traj, np.logspace(-2, -1, 5), 0.5)
    assert 1.8 <= table.slope <= 2.2


# -- continuation radius --------------------------------------------------------

def test_continuation_radius_example():
    assert continuation_radius(100.0, 1.0, 1.0, 3, 1.0) == pytest.approx(1 / np.sqrt(200),
                                                                         rel=1e-15)
    assert continuation_radius(100.0, 1.0, 1.0, 3, 1.0) == pytest.approx(0.070711, abs=1e-6)


def test_continuation_radius_small_time_saturates():
    assert continuation_radius(1e-12, 1.0, 1.0, 3, 0.4) == 0.4


def test_continuation_radius_quadruple_time_halves():
    a = continuation_radius(10.0, 2.0, 3.0, 5, np.inf)
    b = continuation_radius(40.0, 2.0, 3.0, 5, np.inf)
    assert b == pytest.approx(a / 2, rel=1e-15)


def test_continuation_radius_rejects_bad_input():
    for args in ((0.0, 1.0, 1.0), (1.0, 0.0, 1.0), (1.0, 1.0, 0.0)):
        with pytest.raises(ValueError):
            continuation_radius(*args, 3, 1.0)


def test_lower_bound_curve():
    b = lower_bound_curve([0.0, 1.0, 4.0], 0.5, 0.6)
    assert list(b) == [0.5, 0.5, 0.3]


# -- radius over time ---------------------------------------------------------

def _small_config(**scheme):
    cfg = config.load("thm1_radius")
    sc = dataclasses.replace(cfg.scheme, **scheme)
    return dataclasses.replace(cfg, scheme=sc, grid=dataclasses.replace(cfg.grid, n=128))


def test_linear_run_keeps_radius():
    cfg = _small_config(t_final=2.0, dt=1e-2, output_stride=20)
    cfg = dataclasses.replace(cfg, physics=dataclasses.replace(cfg.physics, coupling=0.0))
    res = track_radius_over_time(cfg)
    est = np.array([e.sigma_est for e in res.estimates])
    assert np.ptp(est) < 1e-8
    assert res.verdict


def test_radius_series_reports_surrogates():
    cfg = _small_config(t_final=1.0, dt=1e-2, output_stride=10)
    res = track_radius_over_time(cfg)
    assert len(res.estimates) == len(res.times) == 11
    assert res.c_hat > 0 and res.C_fit > 0
    assert res.bounds[0] == res.sigma0
    assert res.verdict
