import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from susyreplica.hierarchy import (
    ChebyshevFit,
    RecursionFits,
    ResidualReport,
    TauStencil,
    UnresolvedFitError,
    ZeroCrossingError,
    _measured_order,
    _orders,
    chebyshev_nodes,
    fit_log_z,
    fit_z,
    pfkp1_residual,
    pfkp2_residual,
    pfkp_residual,
    virasoro_operator,
    virasoro_residual,
)
from susyreplica.partition import DeformationPoint, tau

Z1_PLUS_FIRST_ZERO = 4.493409457909064175307880927276 / math.pi


@pytest.fixture(scope="module")
def fermionic_fits():
    return RecursionFits.build(1, (0.2, 1.2), 48)


@pytest.fixture(scope="module")
def bosonic_fits():
    return RecursionFits.build(-1, (0.3, 2.0), 48)


def test_chebyshev_nodes():
    x = chebyshev_nodes((0.5, 2.0), 10)
    assert len(x) == 11 and np.all(np.diff(x) > 0)
    assert 0.5 < x[0] and x[-1] < 2.0


def test_chebyshev_fit_derivatives():
    a, b = 0.3, 2.0
    x = chebyshev_nodes((a, b), 30)
    fit = ChebyshevFit(30, (a, b)).fit(x, np.exp(2 * x))
    w = np.linspace(a, b, 7)
    for k in range(4):
        err = np.max(np.abs(fit.predict(w, k) - 2**k * np.exp(2 * w)))
        assert err <= fit.derivative_error(k, 1e-16 * np.exp(4.0))
        assert err <= 10.0 ** (-13 + 3 * k) * 2**k * np.exp(4.0)
    assert fit.resolution_ < 1e-14
    assert fit.derivative_error(3, 1e-15) > fit.derivative_error(1, 1e-15)


@given(st.lists(st.floats(min_value=-5, max_value=5), min_size=1, max_size=8))
def test_chebyshev_fit_reproduces_polynomials(coef):
    poly = np.polynomial.Polynomial(coef)
    x = chebyshev_nodes((0.2, 1.2), 12)
    fit = ChebyshevFit(12, (0.2, 1.2)).fit(x, poly(x))
    w = np.linspace(0.2, 1.2, 5)
    assert np.allclose(fit.predict(w), poly(w), atol=1e-11)
    assert np.allclose(fit.predict(w, 1), poly.deriv()(w), atol=1e-9)


def test_chebyshev_fit_rejects_bad_setup():
    with pytest.raises(ValueError):
        ChebyshevFit(5, (1.0, 0.5)).fit([0.7], [1.0])
    with pytest.raises(ValueError):
        ChebyshevFit(300, (0.5, 1.0)).fit([0.7], [1.0])
    with pytest.raises(ValueError):
        ChebyshevFit(2, (0.5, 1.0)).fit([0.6, 0.7, 3.0], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        ChebyshevFit(2, (0.5, 1.0)).fit([0.6, 0.7, 0.8], [1, 2, 3]).predict(0.7, -1)


def test_chebyshev_fit_is_sklearn_estimator():
    from sklearn.base import clone

    est = ChebyshevFit(degree=7, interval=(0.1, 0.9))
    assert clone(est).get_params() == {"degree": 7, "interval": (0.1, 0.9), "log": False}


def test_log_fit_resolves_and_crosschecks(fermionic_fits):
    c = fermionic_fits.center
    assert c.fit.resolution_ <= 1e-10
    # independent 5-point difference with h = 1e-2: truncation O(h^4 f^(5))
    assert c.crosscheck < 1e-5
    assert fermionic_fits.lower[0] is None     # z_0 = 1 carries no fit


def test_log_fit_detects_zero():
    with pytest.raises(ZeroCrossingError) as info:
        fit_log_z(1, (1.3, 1.6), 24, crosscheck=False)
    assert info.value.zeros[0] == pytest.approx(Z1_PLUS_FIRST_ZERO, abs=1e-10)


def test_log_fit_unresolved():
    with pytest.raises(UnresolvedFitError):
        fit_log_z(1, (0.2, 1.2), 6, crosscheck=False)


def test_log_fit_flavour_zero():
    lf = fit_log_z(0, (0.2, 1.2))
    assert lf.fit is None and lf.derivative(0.5, 2) == 0.0 and lf.derivative_error(2) == 0.0


def test_fit_z_allows_zeros():
    fit, err = fit_z(2, (0.5, 2.5), 40)
    assert fit is not None and err < 1e-15
    assert fit_z(0, (0.5, 1.0)) == (None, 0.0)


def test_recursion_fits_range():
    with pytest.raises(ValueError):
        RecursionFits.build(2, (0.2, 1.2))


@settings(max_examples=12, deadline=None)
@given(st.floats(min_value=0.25, max_value=1.15))
def test_fermionic_recursion_holds(fermionic_fits, omega):
    r = pfkp_residual(1, omega, fermionic_fits)
    assert r.passed and r.normalized_residual <= 1e-5


@settings(max_examples=8, deadline=None)
@given(st.floats(min_value=0.35, max_value=1.95))
def test_bosonic_recursion_holds(bosonic_fits, omega):
    r = pfkp_residual(-1, omega, bosonic_fits)
    assert r.passed and r.normalized_residual <= 1e-5


def test_gauge_fault_is_detected(fermionic_fits):
    good = pfkp_residual(1, 0.7, fermionic_fits)
    bad = pfkp_residual(1, 0.7, fermionic_fits, gauge=1.1)
    assert abs(bad.rhs) / abs(good.rhs) == pytest.approx(1.21, rel=1e-12)
    assert not bad.passed


def test_recursion_flavour_zero_is_trivial():
    r = pfkp_residual(0, 0.8)
    assert r.passed and r.lhs == r.rhs == 0


def test_residual_report_build_and_dict():
    r = ResidualReport.build("x", {"s": 1 + 2j}, 1.0, 1.0 + 1e-9, 1e-8)
    assert r.passed and r.normalized_residual == pytest.approx(1e-9 / 2, rel=1e-6)
    d = r.to_dict()
    assert d["point"]["s"] == [1.0, 2.0] and d["lhs"] == [1.0, 0.0]


def test_orders_and_measured_order():
    assert _orders(1, 1, 3) == (2, 0, 1, 0, 0, 0, 0, 0)
    assert _measured_order([1.0, 0.25, 0.0625 + 0j]) == pytest.approx(2.0)
    assert _measured_order([1.0, 1.0, 1.0]) == math.inf


@pytest.mark.parametrize("m,s", [(1, 0.3 - 0.5j), (-1, 5.0)])
def test_stencil_t1_derivative_equals_s_derivative(m, s):
    # t_1 enters the weight like s (with a factor -1 in the bosonic exponent sign convention of both)
    h = 1e-3
    st_ = TauStencil(m, DeformationPoint(s), h)
    d_t1 = st_.derivative(_orders(1))
    d_s = (tau(m, DeformationPoint(s + h)).complex_value - tau(m, DeformationPoint(s - h)).complex_value) / (2 * h)
    assert d_t1 == pytest.approx(d_s, rel=1e-12)
    assert st_.noise(_orders(1)) > 0


def test_stencil_rejects_high_orders():
    st_ = TauStencil(1, DeformationPoint(0.5), 1e-2)
    with pytest.raises(ValueError):
        st_.derivative((5,))


def test_virasoro_operator_forms_agree_at_q_minus_one():
    for m in (1, -1):
        assert virasoro_operator(m, -1, 0.7, "uncorrected") == virasoro_operator(m, -1, 0.7, "corrected")


def test_virasoro_operator_correction_term():
    lhs_p, rhs_p = virasoro_operator(1, 0, 0.7, "uncorrected")
    lhs_c, rhs_c = virasoro_operator(1, 0, 0.7, "corrected")
    assert lhs_p == lhs_c
    # extra -(q+1) d_0 = -2m on the constant term
    assert rhs_c[len(rhs_p):] == [(-2.0, _orders())]
    with pytest.raises(ValueError):
        virasoro_operator(1, 2, 0.7)
    with pytest.raises(ValueError):
        virasoro_operator(1, 0, 0.7, "other")


@pytest.mark.parametrize("m,s", [(1, 0.3 - 0.5j), (-1, 5.0)])
def test_virasoro_lowest_constraint_both_forms(m, s):
    for form in ("uncorrected", "corrected"):
        r = virasoro_residual(m, -1, s, form)
        assert r.passed and r.normalized_residual < 1e-10


@pytest.mark.parametrize("q", [0, 1])
def test_virasoro_corrected_holds_uncorrected_fails(q):
    good = virasoro_residual(1, q, 0.3 - 0.5j, "corrected")
    bad = virasoro_residual(1, q, 0.3 - 0.5j, "uncorrected")
    assert good.passed and good.normalized_residual < 1e-8
    assert good.details["measured_order"] > 1.8
    assert not bad.passed and bad.normalized_residual > 1e-2


def test_virasoro_uncorrected_defect_is_minus_two_tau():
    # m = 1, q = 0: uncorrected lhs - rhs equals -(q+1) d_0 tau = -2 tau
    r = virasoro_residual(1, 0, 0.3 - 0.5j, "uncorrected")
    base = tau(1, DeformationPoint(0.3 - 0.5j)).complex_value
    assert r.lhs - r.rhs == pytest.approx(-2.0 * base, rel=1e-8)


@pytest.mark.parametrize("fn", [pfkp1_residual, pfkp2_residual])
def test_pfkp_equations_one_flavour(fn):
    r = fn(1, 0.3 - 0.5j)
    assert r.passed and r.normalized_residual < 1e-4
    assert r.details["measured_order"] > 1.5


def test_pfkp_limits():
    with pytest.raises(ValueError):
        pfkp1_residual(2, 0.5)
    with pytest.raises(ValueError):
        virasoro_residual(2, 0, 0.5)


@pytest.mark.parametrize("q", [-1, 0, 1])
@pytest.mark.parametrize("m,s", [(1, 0.3 - 0.5j), (1, -1.1j), (-1, 5.0), (-1, 8.0)])
def test_corrected_virasoro_meets_residual_and_order_thresholds(m, s, q):
    r = virasoro_residual(m, q, s, "corrected")
    assert r.normalized_residual <= 1e-4 and r.passed
    assert r.details["measured_order"] >= 1.8
