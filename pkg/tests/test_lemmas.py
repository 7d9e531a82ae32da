import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from beamgevrey import lemmas
from beamgevrey.data import InitialDataSpec, build
from beamgevrey.lemmas import (
    CheckReport,
    Sampler,
    check_cosh_difference,
    check_exp_cosh_sandwich,
    check_nonlinear_estimate,
    check_product_identity,
    check_product_sech,
    lattice_product_identity,
    run_suite,
)
from beamgevrey.spectral import SpectralField, hermitian_defect, make_grid


# -- scalar examples -------------------------------------------------------------

def test_cosh_difference_examples():
    assert check_cosh_difference(0.0, 1.0) == pytest.approx(0.7284596825923784, rel=1e-14)
    assert check_cosh_difference(5.0, 5.0) == 0.0
    assert check_cosh_difference(-2.0, 3.0) == check_cosh_difference(2.0, 3.0)


@given(a=st.floats(-50, 50), b=st.floats(-50, 50))
def test_cosh_difference_nonnegative(a, b):
    scale = np.cosh(a) + np.cosh(b)
    assert check_cosh_difference(a, b) >= -1e-12 * scale * max(1.0, abs(b * b - a * a))


def test_product_identity_examples():
    assert check_product_identity([0.0]) == 0.0
    assert check_product_identity([1.0, 2.0]) < 1e-15
    assert check_product_identity([0.5, 1.5, 2.5, 3.5]) < 1e-14
    with pytest.raises(ValueError):
        check_product_identity([-1.0, 1.0])


@given(r=st.lists(st.floats(0, 10), min_size=1, max_size=8))
def test_product_identity_residual_tiny(r):
    assert check_product_identity(r) < 1e-12


def test_product_sech_unit_pair():
    m = check_product_sech([[1.0, 0.0], [-1.0, 0.0]])
    assert m.lhs == pytest.approx(1 - 1 / np.cosh(1.0) ** 2, rel=1e-14)
    assert m.rhs == 8.0 and m.rhs2 == 16.0
    assert m.margin > 0 and m.margin2 > 0


@given(xi=st.lists(st.floats(-50, 50), min_size=2, max_size=5))
def test_product_sech_margins_nonnegative(xi):
    m = check_product_sech(xi)
    assert m.margin >= -1e-12 * max(m.rhs, m.lhs)
    assert m.margin2 >= -1e-12 * max(m.rhs2, m.lhs)


def test_exp_cosh_sandwich_examples():
    lo, hi = check_exp_cosh_sandwich(1.0)
    assert lo == pytest.approx(np.exp(-1) / 2, rel=1e-14)
    assert hi == pytest.approx(np.sinh(1.0), rel=1e-14)
    assert check_exp_cosh_sandwich(0.0) == (0.5, 0.0)


# -- sampler ---------------------------------------------------------------------

def test_sampler_deterministic_and_seed_dependent():
    a = Sampler(5).uniform(0, 0.0, 1.0, 100)
    b = Sampler(5).uniform(0, 0.0, 1.0, 100)
    c = Sampler(6).uniform(0, 0.0, 1.0, 100)
    d = Sampler(5).uniform(1, 0.0, 1.0, 100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


@pytest.mark.parametrize("dim,n,band", [(1, 32, 6), (2, 16, 3), (3, 8, 2)])
def test_sampler_fields_hermitian_and_banded(dim, n, band):
    g = make_grid(dim, n, 2 * np.pi)
    k = g.k_index[np.indices(g.shape)]
    outside = (np.abs(k) > band).any(axis=0)
    for f in Sampler(1).fields(g, band, 3):
        c = f.coefficients
        assert hermitian_defect(c) == 0.0
        assert not c[outside].any()
        assert c[(0,) * dim].imag == 0.0


def test_sampler_fields_grid_independent():
    small = next(Sampler(2).fields(make_grid(1, 32, 2 * np.pi), 5, 1)).coefficients
    big = next(Sampler(2).fields(make_grid(1, 128, 2 * np.pi), 5, 1)).coefficients
    for k in range(-5, 6):
        assert small[k] == big[k]


def test_sampler_start_offset():
    g = make_grid(1, 32, 2 * np.pi)
    a = [f.coefficients for f in Sampler(3).fields(g, 4, 5)]
    b = [f.coefficients for f in Sampler(3).fields(g, 4, 2, start=3)]
    assert np.array_equal(a[3], b[0]) and np.array_equal(a[4], b[1])


def test_sampler_band_validation():
    g = make_grid(1, 16, 1.0)
    with pytest.raises(ValueError):
        next(Sampler(0).fields(g, 8, 1))
    with pytest.raises(ValueError):
        next(Sampler(0).fields(g, 0, 1))


# -- reports and suites ------------------------------------------------------------

def _rep(n, v, w, extra):
    return CheckReport("x", n, v, w, {"w": w}, 0, extra)


def test_merge_associative():
    a = _rep(3, 0, 0.2, {"max_r": 1.0, "min_m": 0.5, "count": 1})
    b = _rep(4, 1, -0.1, {"max_r": 3.0, "min_m": 0.7, "count": 2})
    c = _rep(5, 0, 0.05, {"max_r": 2.0, "min_m": 0.1, "count": 4})
    left, right = a.merge(b).merge(c), a.merge(b.merge(c))
    assert left == right
    assert left.samples == 12 and left.violations == 1 and left.worst_margin == -0.1
    assert left.extra == {"max_r": 3.0, "min_m": 0.1, "count": 7}


def test_merge_rejects_other_check():
    with pytest.raises(ValueError):
        _rep(1, 0, 0, {}).merge(CheckReport("y", 1, 0, 0.0, None, 0))


@pytest.mark.parametrize("name", sorted(lemmas.SUITES))
def test_suites_thread_and_chunk_independent_counts(name):
    one = run_suite(name, 20000, seed=4, threads=1, chunk=4096)
    many = run_suite(name, 20000, seed=4, threads=4, chunk=4096)
    assert one.to_json() == many.to_json()
    assert one.samples == 20000 and one.passed


@pytest.mark.parametrize("name", sorted(lemmas.SUITES))
def test_suites_seed_changes_inputs(name):
    a = run_suite(name, 5000, seed=1)
    b = run_suite(name, 5000, seed=2)
    assert a.passed and b.passed
    assert a.to_json() != b.to_json()


def test_report_json_roundtrip():
    rep = run_suite("product_sech", 3000, seed=0)
    d = json.loads(rep.to_json())
    assert d["check_name"] == "product_sech" and d["samples"] == 3000
    for key in ("violations_pairwise", "violations_two_largest", "violations_triangle"):
        assert d["extra"][key] == 0
    assert 0 < d["extra"]["max_lhs_over_pair_sum"] < 1


def test_sandwich_suite_hits_endpoints():
    rep = run_suite("exp_cosh_sandwich", 10, seed=0)
    assert rep.passed
    assert rep.extra["min_margin_upper"] == 0.0


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suite("nope")
    with pytest.raises(ValueError):
        run_suite("cosh_difference", 0)


def test_lattice_product_identity():
    rep = lattice_product_identity()
    assert rep.samples == 11 + 11**2 + 11**3 + 11**4
    assert rep.passed and -rep.worst_margin < 1e-14


# -- nonlinear estimate ----------------------------------------------------------

def test_nonlinear_p1_ratio_at_most_one():
    g = make_grid(1, 64, 2 * np.pi)
    stats = check_nonlinear_estimate(list(Sampler(0).fields(g, 8, 20)), 0.1, 1)
    assert stats.max_ratio <= 1.0
    assert stats.forms_agree and stats.min_majorant_margin >= -1e-12


@pytest.mark.parametrize("dim,n,band,p", [(1, 64, 8, 3), (1, 128, 8, 5), (2, 32, 3, 3)])
def test_nonlinear_forms_agree_and_majorant_holds(dim, n, band, p):
    g = make_grid(dim, n, 2 * np.pi)
    stats = check_nonlinear_estimate(list(Sampler(1).fields(g, band, 10)), 0.1, p)
    assert stats.forms_agree
    assert stats.min_majorant_margin >= -1e-12
    assert np.isfinite(stats.ratios).all() and stats.q95 <= stats.max_ratio


def test_nonlinear_single_mode_closed_form():
    g = make_grid(1, 32, 2 * np.pi)
    k, sigma = 2, 0.1
    c = np.zeros(32, dtype=complex)
    c[k] = c[-k] = 0.5
    stats = check_nonlinear_estimate([SpectralField(g, c)], sigma, 3)
    # cos^3 = (3 cos kx + cos 3kx) / 4
    num = np.sqrt(2 * np.pi * 2 * ((3 / 8 * np.cosh(sigma * k)) ** 2
                                   + (1 / 8 * np.cosh(3 * sigma * k)) ** 2))
    den = np.sqrt(2 * np.pi * 2 * (0.5 * np.cosh(sigma * k) * (1 + k * k)) ** 2)
    assert stats.ratios[0] == pytest.approx(num / den**3, rel=1e-12)


def test_nonlinear_refinement_on_analytic_data():
    vals = []
    for n in (128, 256):
        g = make_grid(1, n, 2 * np.pi)
        u = build(InitialDataSpec("lorentz", a=0.5), g)
        vals.append(check_nonlinear_estimate([u], 0.1, 3).max_ratio)
    assert abs(vals[1] / vals[0] - 1) < 1e-6
