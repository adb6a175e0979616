import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from susyreplica.specfun import (
    KERNEL_SERIES_CUT,
    barnes_g_log_ratio,
    sin_cos_integrals,
    sine_kernel,
    sine_kernel_second_derivative,
    tail_sine_integral,
)

# mpmath at 30 digits
SI_03, CI_03 = 0.298504043807043161386446229575, -0.649172932971161744956181105135
SI_12, CI_12 = 1.50497124152637337052714853212, -0.049780006884113675595921208737


def test_si_ci_frozen_values():
    assert sin_cos_integrals(0.3) == pytest.approx((SI_03, CI_03), abs=1e-15)
    assert sin_cos_integrals(12.0) == pytest.approx((SI_12, CI_12), abs=1e-15)


def test_si_ci_vectorised_and_domain():
    si, ci = sin_cos_integrals(np.array([0.3, 12.0]))
    assert si[1] == pytest.approx(SI_12, abs=1e-15)
    with pytest.raises(ValueError):
        sin_cos_integrals(0.0)
    with pytest.raises(ValueError):
        sin_cos_integrals(np.array([1.0, -2.0]))


def test_sine_kernel_at_zero_and_integer():
    k0 = sine_kernel(0.0)
    assert (k0.s, k0.s_prime) == (1.0, 0.0)
    k1 = sine_kernel(1.0)
    assert k1.s == pytest.approx(0.0, abs=1e-16)
    assert k1.s_prime == pytest.approx(-1.0, abs=1e-15)


@given(st.floats(min_value=0.5, max_value=2.0))
def test_kernel_branches_agree_at_the_cut(frac):
    w = frac * KERNEL_SERIES_CUT / math.pi
    x = math.pi * w
    direct_s = math.sin(x) / x
    direct_d = math.pi * (x * math.cos(x) - math.sin(x)) / (x * x)
    k = sine_kernel(w)
    assert k.s == pytest.approx(direct_s, rel=1e-14)
    assert k.s_prime == pytest.approx(direct_d, rel=1e-9)


@given(st.floats(min_value=-6.0, max_value=6.0))
def test_kernel_derivatives_match_finite_differences(w):
    h = 1e-5
    fd1 = (sine_kernel(w + h).s - sine_kernel(w - h).s) / (2 * h)
    fd2 = (sine_kernel(w + h).s_prime - sine_kernel(w - h).s_prime) / (2 * h)
    assert sine_kernel(w).s_prime == pytest.approx(fd1, abs=1e-8)
    assert sine_kernel_second_derivative(w) == pytest.approx(fd2, abs=1e-7)


def test_second_derivative_at_zero():
    assert sine_kernel_second_derivative(0.0) == pytest.approx(-math.pi**2 / 3, rel=1e-15)


def test_tail_sine_integral():
    assert tail_sine_integral(0.0) == 0.5
    # int_1^inf sin(pi t)/(pi t) dt = 1/2 - Si(pi)/pi
    assert tail_sine_integral(1.0) == pytest.approx(0.5 - 1.851937051982466 / math.pi, abs=1e-15)
    with pytest.raises(ValueError):
        tail_sine_integral(-0.1)


@settings(max_examples=30)
@given(st.floats(min_value=0.05, max_value=30.0))
def test_tail_sine_integral_derivative_is_minus_kernel(w):
    h = 1e-5
    fd = (tail_sine_integral(w + h) - tail_sine_integral(w - h)) / (2 * h)
    assert fd == pytest.approx(-sine_kernel(w).s, abs=1e-9)


def test_barnes_g_ratio_hand_unrolled():
    # G(7/2)/G(1/2) = Gamma(1/2) Gamma(3/2) Gamma(5/2)
    expected = math.log(math.gamma(0.5) * math.gamma(1.5) * math.gamma(2.5))
    assert barnes_g_log_ratio(1) == pytest.approx(expected, abs=1e-15)
    with pytest.raises(ValueError):
        barnes_g_log_ratio(0)
