import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from susyreplica.correlation import (
    SERIES_CUT,
    CorrelationCurve,
    TailClosureError,
    curve_table,
    g_prime_factorized,
    one_flavour_parts,
    r2_asymptotic,
    r2_exact,
    r2_exact_derivative,
    r2_from_factorization,
    tail_closure_error,
)
from susyreplica.partition import z1_closed_forms, z_minus, z_plus

# mpmath, oscillatory tail by quadosc
R2 = {1.0: 0.910510127763916364883985577088, 0.37: 0.542779874896755988967004688172}


@pytest.mark.parametrize("omega", sorted(R2))
def test_r2_frozen(omega):
    assert r2_exact(omega) == pytest.approx(R2[omega], abs=1e-14)


def test_r2_level_repulsion_is_linear():
    assert r2_exact(1e-4) / 1e-4 == pytest.approx(math.pi**2 / 6, rel=1e-7)
    assert r2_exact_derivative(1e-6) == pytest.approx(math.pi**2 / 6, rel=1e-8)


def test_domain():
    for fn in (r2_exact, r2_exact_derivative, r2_asymptotic, one_flavour_parts, g_prime_factorized):
        with pytest.raises(ValueError):
            fn(0.0)
    with pytest.raises(ValueError):
        r2_exact(np.array([1.0, -1.0]))


@settings(max_examples=40)
@given(st.floats(min_value=0.01, max_value=25.0))
def test_derivative_identity_against_five_point_difference(w):
    h = 1e-3 if w > 2e-3 else w / 4
    fd = (r2_exact(w - 2 * h) - 8 * r2_exact(w - h) + 8 * r2_exact(w + h) - r2_exact(w + 2 * h)) / (12 * h)
    assert r2_exact_derivative(w) == pytest.approx(fd, abs=1e-9)


@settings(max_examples=60)
@given(st.floats(min_value=0.005, max_value=40.0))
def test_factorized_slope_equals_exact_slope(w):
    assert g_prime_factorized(w).r2_slope == pytest.approx(r2_exact_derivative(w), abs=1e-11)


def test_imaginary_part_carries_the_pole():
    # Im g' = -2 pi/w^2 + regular part: w^2 Im g' -> -2 pi as w -> 0
    w = 1e-4
    assert w * w * g_prime_factorized(w).g_prime.imag == pytest.approx(-2 * math.pi, rel=1e-3)


@settings(max_examples=40)
@given(st.floats(min_value=0.02, max_value=12.0))
def test_one_flavour_parts_match_partition_functions(w):
    zp, dzp, zm, dzm = one_flavour_parts(w)
    cp, cm = z1_closed_forms(w)
    assert zp == pytest.approx(cp.real, rel=1e-12, abs=1e-15)
    assert zm == pytest.approx(cm, rel=1e-13)
    # 5-point difference, step shrinking with w since dz1m grows like 1/w^2
    h = 1e-3 * min(w, 1.0)

    def fd(i):
        v = [one_flavour_parts(w + k * h)[i] for k in (-2, -1, 1, 2)]
        return (v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * h)

    assert dzp == pytest.approx(fd(0), abs=1e-9)
    assert dzm == pytest.approx(fd(2), rel=1e-8)


def test_one_flavour_parts_against_pfaffian_route():
    for w in (0.3, 2.2):
        zp, _, zm, _ = one_flavour_parts(w)
        assert zp == pytest.approx(z_plus(1, w).complex_value.real, rel=1e-12)
        assert zm == pytest.approx(z_minus(1, w).complex_value, rel=1e-10)


@pytest.mark.parametrize("x", [0.3, 0.49, 0.51, 0.8])
def test_both_branches_near_the_series_cut(x):
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    f = lambda y: 4 * (mp.sin(y) - y * mp.cos(y)) / y**3
    zp, dzp = one_flavour_parts(x / math.pi)[:2]
    assert zp == pytest.approx(float(f(mp.mpf(x))), abs=1e-15)
    assert dzp == pytest.approx(float(mp.pi * mp.diff(f, mp.mpf(x))), abs=1e-13)


def test_vectorised_matches_scalar():
    grid = np.array([0.05, 0.3, 1.7])
    assert np.allclose(r2_exact(grid), [r2_exact(w) for w in grid], rtol=0, atol=0)


@pytest.mark.parametrize("w", [10.0, 20.0, 50.0])
def test_asymptotic_gap_scales_as_fourth_power(w):
    gap = abs(r2_exact(w) - r2_asymptotic(w))
    assert gap * (math.pi * w) ** 4 < 3.0


def test_factorized_curve_matches_exact():
    grid = np.linspace(0.05, 10.0, 200)
    fac = r2_from_factorization(grid)
    exact = CorrelationCurve(grid, r2_exact(grid), "exact")
    assert fac.max_deviation(exact) <= 1e-8
    assert np.all(fac.error <= 1e-9)


def test_closure_control():
    with pytest.raises(TailClosureError):
        r2_from_factorization(np.array([0.5, 3.0]), tol=1e-9, extend=False)
    ok = r2_from_factorization(np.array([0.5, 60.0]), tol=1e-9, extend=False)
    assert ok.error[0] == pytest.approx(tail_closure_error(60.0))
    with pytest.raises(ValueError):
        r2_from_factorization(np.array([2.0, 1.0]))


def test_max_deviation_requires_same_grid():
    a = CorrelationCurve(np.array([1.0, 2.0]), np.zeros(2), "a")
    b = CorrelationCurve(np.array([1.0, 3.0]), np.zeros(2), "b")
    with pytest.raises(ValueError):
        a.max_deviation(b)


def test_curve_table_columns():
    grid = np.array([0.5, 1.0, 4.0])
    t = curve_table(grid)
    assert t.shape == (3, 5)
    assert np.allclose(t[:, 1], r2_exact(grid))
    assert np.all(t[:, 4] == np.abs(t[:, 3] - t[:, 1]))


def test_small_omega_behaviour_of_g_prime():
    re = [g_prime_factorized(w).g_prime.real for w in (1e-2, 1e-3, 1e-4)]
    assert re[2] == pytest.approx(re[1], rel=1e-3) and abs(re[2]) < 40.0
    regular = [w * w * abs(g_prime_factorized(w).g_prime + 2j * math.pi / w**2) for w in (1e-2, 1e-3, 1e-4)]
    assert regular[0] > regular[1] > regular[2] and regular[2] < 1e-5
