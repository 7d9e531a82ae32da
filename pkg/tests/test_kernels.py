import numpy as np
import pytest

from beamgevrey import kernels
from beamgevrey._pykernels import _sign_matrix

BACKENDS = kernels.available_backends()


@pytest.fixture(params=BACKENDS)
def k(request):
    return kernels.get_backend(request.param)


def test_compiled_backend_built():
    assert "c" in BACKENDS


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_cosh_difference_scalar(k):
    rel, logdom = k.cosh_difference_rel(np.array([0.0, 5.0]), np.array([1.0, 5.0]))
    rhs = 0.5 * (np.cosh(1.0) + 1.0)
    lhs = np.cosh(1.0) - 1.0
    assert rel[0] == pytest.approx((rhs - lhs) / rhs, rel=1e-14)
    assert np.exp(logdom[0]) == pytest.approx(rhs, rel=1e-14)
    assert rel[1] == 0.0 and logdom[1] == -np.inf


def test_cosh_difference_large_arguments(k):
    a = np.array([650.0, 700.0, -699.0])
    b = np.array([651.0, 699.5, 698.0])
    rel, logdom = k.cosh_difference_rel(a, b)
    assert np.isfinite(rel).all() and (rel > 0).all()
    assert logdom[0] > 650


def test_product_identity_two_terms(k):
    res = k.product_identity_residual(np.array([[0.7, 1.3]]))
    assert res[0] < 1e-15
    direct = 2 * np.cosh(0.7) * np.cosh(1.3) - (np.cosh(0.6) + np.cosh(2.0))
    assert abs(direct) < 1e-14


def test_sign_matrix():
    s = _sign_matrix(3)
    assert s.shape == (4, 3)
    assert (s[:, 0] == 1).all()
    assert {tuple(r) for r in s[:, 1:]} == {(1, 1), (1, -1), (-1, 1), (-1, -1)}


def test_product_sech_example(k):
    xi = np.array([[[1.0], [-1.0]]])
    rel1, rel2, lhs = k.product_sech_margins(xi)
    assert lhs[0] == pytest.approx(1 - 1 / np.cosh(1.0) ** 2, rel=1e-14)
    assert lhs[0] == pytest.approx(0.580026, abs=1e-6)
    assert rel1[0] == pytest.approx((8 - lhs[0]) / 8, rel=1e-14)
    assert rel2[0] == pytest.approx((16 - lhs[0]) / 16, rel=1e-14)


def test_rotate_modes_in_place(k):
    u = np.array([1 + 1j, 2.0 + 0j])
    v = np.array([0j, 1j])
    c = np.array([0.5, 1.0])
    a = np.array([2.0, 0.0])
    b = np.array([3.0, 0.0])
    k.rotate_modes(u, v, c, a, b)
    assert np.allclose(u, [0.5 + 0.5j, 2.0])
    assert np.allclose(v, [-3 - 3j, 1j])


def test_log_sum_sq(k):
    logw = np.array([0.0, 400.0, 10.0])
    absc = np.array([1.0, 1.0, 0.0])
    assert k.log_sum_sq(logw, absc) == pytest.approx(800.0, rel=1e-15)
    assert k.log_sum_sq(logw, np.zeros(3)) == -np.inf


def test_backends_agree(rng):
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend unavailable")
    c, py = kernels.get_backend("c"), kernels.get_backend("python")
    a, b = rng.uniform(-60, 60, (2, 5000))
    for x, y in zip(c.cosh_difference_rel(a, b), py.cosh_difference_rel(a, b)):
        assert np.allclose(x, y, rtol=1e-13, atol=1e-15)
    r = np.ascontiguousarray(rng.uniform(0, 10, (2000, 5)))
    assert np.allclose(c.product_identity_residual(r), py.product_identity_residual(r),
                       atol=1e-15)
    xi = np.ascontiguousarray(rng.standard_normal((2000, 4, 3)) * 5)
    for x, y in zip(c.product_sech_margins(xi), py.product_sech_margins(xi)):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-15)
    logw = rng.uniform(0, 300, 1000)
    absc = rng.uniform(0, 1, 1000)
    assert c.log_sum_sq(logw, absc) == pytest.approx(py.log_sum_sq(logw, absc), rel=1e-14)
