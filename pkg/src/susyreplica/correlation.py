"""Two-level correlation function of the infinite GOE by three routes.

* exact: the sine-kernel closed form;
* asymptotic: the large-omega expansion;
* factorized: integrating ``Re g'(omega)``, built from the one-flavour
  fermionic and bosonic partition functions, inward from infinity.

All curves are the smooth part of the correlator; the ``delta(omega)``
self-correlation term is excluded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import PanelRule
from .specfun import sin_cos_integrals, sine_kernel, sine_kernel_second_derivative, tail_sine_integral

__all__ = [
    "CorrelationCurve",
    "GreenFunctionDerivative",
    "TailClosureError",
    "r2_exact",
    "r2_asymptotic",
    "r2_exact_derivative",
    "one_flavour_parts",
    "g_prime_factorized",
    "tail_closure_error",
    "r2_from_factorization",
    "curve_table",
]

# below this pi*omega the fermionic one-flavour function uses its Taylor series
SERIES_CUT = 0.5
_SERIES_TERMS = 10
PANEL_WIDTH = 0.25
PANEL_ORDER = 24
DEFAULT_TAIL_TOL = 1e-9


class TailClosureError(ValueError):
    """The asymptotic closure beyond the grid is not accurate enough."""


@dataclass(frozen=True)
class GreenFunctionDerivative:
    """``g'(omega)``; its real part equals ``2 pi^2 dR2/domega`` for ``omega > 0``."""

    omega: float
    g_prime: complex

    @property
    def r2_slope(self) -> float:
        return self.g_prime.real / (2.0 * math.pi**2)


@dataclass
class CorrelationCurve:
    """Sampled smooth two-level correlation (self-correlation delta excluded)."""

    omega: np.ndarray
    r2: np.ndarray
    source: str
    error: np.ndarray | None = None

    def max_deviation(self, other: "CorrelationCurve") -> float:
        if not np.array_equal(self.omega, other.omega):
            raise ValueError("curves live on different grids")
        return float(np.max(np.abs(self.r2 - other.r2)))


def _positive(omega):
    w = np.asarray(omega, dtype=float)
    if np.any(~(w > 0)):
        raise ValueError("omega must be positive")
    return w


def _out(w, x):
    return float(x) if w.ndim == 0 else x


def r2_exact(omega):
    """``1 - S^2 - S' * int_omega^inf S`` for ``omega > 0``."""
    w = _positive(omega)
    k = sine_kernel(w)
    return _out(w, 1.0 - k.s**2 - k.s_prime * tail_sine_integral(w))


def r2_exact_derivative(omega):
    """``d/domega`` of :func:`r2_exact`: ``-S S' - S'' int_omega^inf S``.

    The principal-value term ``(1/pi) d/domega Re[i/(omega + i0)]`` is
    identically zero for ``omega > 0`` and is therefore omitted.
    """
    w = _positive(omega)
    k = sine_kernel(w)
    return _out(w, -k.s * k.s_prime - sine_kernel_second_derivative(w) * tail_sine_integral(w))


def r2_asymptotic(omega):
    """Large-omega expansion ``1 - 1/(pi w)^2 + 8 cos(2 pi w)/(2 pi w)^4``.

    Only meaningful for ``omega`` beyond about one mean level spacing.
    """
    w = _positive(omega)
    x = math.pi * w
    return _out(w, 1.0 - 1.0 / x**2 + 2.0 * math.gamma(3) ** 2 * np.cos(2.0 * x) / (2.0 * x) ** 4)


def _fermionic_series(x):
    k = np.arange(_SERIES_TERMS)
    coef = 4.0 * (-1.0) ** k * (2 * k + 2) / np.array([math.factorial(2 * j + 3) for j in k], dtype=float)
    x = np.asarray(x)[..., None]
    val = np.sum(coef * x ** (2 * k), axis=-1)
    dval = np.sum(coef[1:] * (2 * k[1:]) * x ** (2 * k[1:] - 1), axis=-1)
    return val, dval


def one_flavour_parts(omega):
    """``(z1p, dz1p, z1m, dz1m)``: one-flavour partition functions and omega-derivatives.

    ``z1p = 4 (sin x - x cos x)/x^3`` and
    ``z1m = i E(x)/(2 pi omega)`` with ``E = -Ci(x) + i(pi/2 - Si(x))``,
    ``x = pi omega``, using ``dE/domega = -exp(i x)/omega``.
    """
    w = _positive(omega)
    x = math.pi * w
    small = x < SERIES_CUT
    xs = np.where(small, x, 1.0)
    xd = np.where(small, 1.0, x)
    sv, sd = _fermionic_series(xs)
    sx, cx = np.sin(xd), np.cos(xd)
    zp = np.where(small, sv, 4.0 * (sx - xd * cx) / xd**3)
    dzp = math.pi * np.where(small, sd, (12.0 * xd * cx + 4.0 * (xd * xd - 3.0) * sx) / xd**4)
    si, ci = sin_cos_integrals(x)
    E = -ci + 1j * (0.5 * math.pi - si)
    dE = -np.exp(1j * x) / w
    zm = 1j * E / (2.0 * math.pi * w)
    dzm = 1j / (2.0 * math.pi) * (dE / w - E / w**2)
    if w.ndim == 0:
        return float(zp), float(dzp), complex(zm), complex(dzm)
    return zp, dzp, zm, dzm


def _g_prime(w):
    zp, dzp, zm, dzm = one_flavour_parts(w)
    return -2j * math.pi / w**2 + math.pi**4 * w**2 * (zp * dzm - zm * dzp)


def g_prime_factorized(omega: float) -> GreenFunctionDerivative:
    """``g'(w) = -2 i pi/w^2 + pi^4 w^2 (z1p dz1m - z1m dz1p)``.

    The product form is the logarithmic derivative of ``z1m/z1p`` with the
    logarithm cleared, so zeros of ``z1p`` are regular points.
    """
    w = float(_positive(omega))
    return GreenFunctionDerivative(w, complex(_g_prime(w)))


def tail_closure_error(omega_max: float) -> float:
    """Size of the last retained oscillatory term of the expansion at ``omega_max``."""
    return 2.0 * math.gamma(3) ** 2 / (2.0 * math.pi * omega_max) ** 4


def _closure_point(omega_max: float, tol: float) -> float:
    w_tol = (2.0 * math.gamma(3) ** 2 / tol) ** 0.25 / (2.0 * math.pi)
    return max(omega_max, math.ceil(w_tol))


def r2_from_factorization(grid, tol: float = DEFAULT_TAIL_TOL, extend: bool = True) -> CorrelationCurve:
    """Two-level correlation from the factorized Green function.

    ``R2(w) = R2(W) - (1/2 pi^2) int_w^W Re g'``, where ``R2(W)`` is closed
    with the asymptotic expansion at ``W``. With ``extend=True`` the
    integration starts at the smallest integer ``W >= max(grid)`` whose
    closure error is below ``tol``; otherwise ``W = max(grid)`` and a large
    closure error raises.

    Raises
    ------
    TailClosureError
        If ``extend=False`` and the closure error at ``max(grid)`` exceeds ``tol``.
    """
    grid = _positive(np.atleast_1d(grid))
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    wmax = float(grid[-1])
    if extend:
        W = _closure_point(wmax, tol)
    else:
        W = wmax
        if tail_closure_error(W) > tol:
            raise TailClosureError(f"closure error {tail_closure_error(W):.2e} at omega = {W} exceeds {tol:.1e}")
    breaks = np.unique(np.concatenate([grid, [W]]))
    # subdivide every grid interval into panels no wider than PANEL_WIDTH
    fine = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        k = max(1, math.ceil((b - a) / PANEL_WIDTH))
        fine.extend(np.linspace(a, b, k + 1)[1:])
    fine = np.asarray(fine)
    rule = PanelRule(fine, PANEL_ORDER)
    slope = _g_prime(rule.nodes).real / (2.0 * math.pi**2)
    cum = np.concatenate([[0.0], np.cumsum(rule.panel_integrals(slope)[::-1])])[::-1]
    # cum[i] = integral from fine[i] to W
    at_breaks = float(r2_asymptotic(W)) - cum
    idx = np.searchsorted(fine, grid)
    r2 = at_breaks[idx]
    err = np.full_like(r2, tail_closure_error(W))
    return CorrelationCurve(grid, r2, "factorized", err)


def curve_table(grid, tol: float = DEFAULT_TAIL_TOL):
    """Rows ``(omega, r2_exact, r2_asymptotic, r2_factorized, abs_diff)`` on ``grid``."""
    grid = _positive(np.atleast_1d(grid))
    ex = np.atleast_1d(r2_exact(grid))
    asym = np.atleast_1d(r2_asymptotic(grid))
    fac = r2_from_factorization(grid, tol).r2
    return np.column_stack([grid, ex, asym, fac, np.abs(fac - ex)])
