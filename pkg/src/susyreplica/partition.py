"""Replica partition functions of the infinite GOE and their tau-function deformations.

Fermionic flavours (``m > 0``) are integrals over ``[-1, 1]^m`` with
``|Delta|^4``; bosonic flavours (``m < 0``) are integrals over ``[1, inf)^(2m)``
with ``|Delta|``. Both are reduced to Pfaffians of moment matrices (de Bruijn):

* ``int prod w(l_k) |Delta_m|^4 = m! Pf[(j - i) nu_{i+j-3}]_{2m x 2m}``
* ``int prod w(l_k) |Delta_2m| = (2m)! Pf[K_ij]_{2m x 2m}``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quadrature as quad
from .skewlinalg import LogScaledComplex, pfaffian, skew_defect
from .specfun import barnes_g_log_ratio, sin_cos_integrals, sine_kernel

__all__ = [
    "ReplicaIndex",
    "DeformationPoint",
    "PartitionValue",
    "InadmissibleDeformation",
    "log_constant_fermionic",
    "log_constant_bosonic",
    "constant_fermionic",
    "constant_bosonic",
    "fermionic_matrix",
    "z_plus",
    "z_minus",
    "z1_closed_forms",
    "z_super",
    "tau",
    "projection_constant",
    "calibrate_projection",
]

MAX_FERMIONIC = 3
MAX_BOSONIC = 2
MAX_TAU = 2
MIN_DEFORMATION_ORDER = 6
MAX_DEFORMATION_ORDER = 8
OMEGA_MIN_BOSONIC = 1e-3
# bosonic deformations below this size may be evaluated on a truncated ray
INFINITESIMAL_T = 1e-2


class InadmissibleDeformation(ValueError):
    """Deformed bosonic weight is not integrable on [1, inf)."""


@dataclass(frozen=True)
class ReplicaIndex:
    """Signed replica number ``n``: bosonic for ``n < 0``, fermionic for ``n > 0``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or abs(self.n) > MAX_FERMIONIC:
            raise ValueError(f"replica index must be an integer in [-{MAX_FERMIONIC}, {MAX_FERMIONIC}]")
        if self.n < -MAX_BOSONIC:
            raise ValueError(f"bosonic flavours are limited to |n| <= {MAX_BOSONIC}")

    def __int__(self):
        return int(self.n)


@dataclass(frozen=True)
class DeformationPoint:
    """Spectral parameter ``s`` plus deformation times ``t = (t_1, ..., t_K)``."""

    s: complex
    t: tuple = (0.0,) * MIN_DEFORMATION_ORDER

    def __post_init__(self):
        t = tuple(float(x) for x in self.t)
        if len(t) > MAX_DEFORMATION_ORDER:
            raise ValueError(f"deformation truncated at K <= {MAX_DEFORMATION_ORDER}")
        t = t + (0.0,) * (MIN_DEFORMATION_ORDER - len(t))
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "s", complex(self.s))

    @classmethod
    def from_omega(cls, omega, t=()) -> "DeformationPoint":
        """Point on the projection line ``s = -i pi omega / 2``."""
        return cls(quad.omega_to_s(omega), tuple(t))

    @property
    def is_projection(self) -> bool:
        return all(x == 0 for x in self.t)

    def shifted(self, j: int, h: float) -> "DeformationPoint":
        """Copy with ``t_j -> t_j + h`` (1-based ``j``)."""
        if not 1 <= j <= MAX_DEFORMATION_ORDER:
            raise ValueError("deformation index out of range")
        t = list(self.t) + [0.0] * max(0, j - len(self.t))
        t[j - 1] += h
        return DeformationPoint(self.s, tuple(t))


@dataclass(frozen=True)
class PartitionValue:
    value: LogScaledComplex
    error_estimate: float
    method: str
    real_even: bool = False
    notes: dict = field(default_factory=dict, compare=False)

    def __complex__(self):
        return self.value.to_complex()

    @property
    def complex_value(self) -> complex:
        return self.value.to_complex()


# ---------------------------------------------------------------------------
# normalisation constants


def _check_m(m: int, limit: int):
    if int(m) != m or not 1 <= m <= limit:
        raise ValueError(f"m must be an integer in [1, {limit}]")


def log_constant_fermionic(m: int) -> float:
    """Logarithm of the fermionic constant ``c_m^(+)``."""
    _check_m(m, MAX_FERMIONIC)
    out = (m * math.log(2.0 * math.pi) - 4 * m * m * math.log(2.0) - math.lgamma(m + 1)
           + math.lgamma(m + 0.5) - barnes_g_log_ratio(m))
    out += math.fsum(math.lgamma(2 * m + 2 * j) - 3.0 * math.lgamma(2 * j) for j in range(1, m + 1))
    return out


def log_constant_bosonic(m: int) -> float:
    """Logarithm of the bosonic constant ``c_m^(-)``."""
    _check_m(m, MAX_BOSONIC)
    return (m * math.log(math.pi) - 2 * m * m * math.log(2.0) - math.lgamma(2 * m + 1)
            - 2.0 * math.fsum(math.lgamma(j / 2.0) for j in range(1, 2 * m + 1)))


def constant_fermionic(m: int) -> float:
    return math.exp(log_constant_fermionic(m))


def constant_bosonic(m: int) -> float:
    return math.exp(log_constant_bosonic(m))


# ---------------------------------------------------------------------------
# Pfaffian fast paths


def fermionic_matrix(m: int, s: complex, t=(), rule=None) -> np.ndarray:
    """Skew matrix ``[(j - i) nu_{i+j-3}]_{i,j=1..2m}`` of deformed fermionic moments."""
    nu = quad.fermionic_moments(4 * m - 1, s, t, rule)
    i = np.arange(2 * m)
    ii, jj = np.meshgrid(i, i, indexing="ij")
    # 0-based: (j - i) nu_{i + j - 1}; the diagonal has factor 0
    idx = np.clip(ii + jj - 1, 0, None)
    return (jj - ii) * nu[idx]


def _fermionic_pf(m, s, t, rule):
    return pfaffian(fermionic_matrix(m, s, t, rule))


def z_plus(m: int, omega, rule=None, estimate_error: bool = True) -> PartitionValue:
    """Fermionic partition function ``z_m^(+)(omega)`` (``m <= 3``)."""
    _check_m(m, MAX_FERMIONIC)
    rule = rule or quad.gauss_legendre_rule(quad.DEFAULT_FINITE_ORDER)
    s = quad.omega_to_s(omega)
    log_c = log_constant_fermionic(m) + math.lgamma(m + 1)
    pf = _fermionic_pf(m, s, (), rule)
    value = pf * LogScaledComplex(log_c)
    err = 0.0
    if estimate_error:
        ref = _fermionic_pf(m, s, (), quad.gauss_legendre_rule(min(rule.order + 32, quad.MAX_RULE_ORDER)))
        err = abs((ref * LogScaledComplex(log_c)).to_complex() - value.to_complex())
    err += 1e-15 * abs(value.to_complex())
    return PartitionValue(value, err, "pfaffian", real_even=True)


def _bosonic_pf(m, s, t, contour):
    K, path = quad.bosonic_kernel_matrix(2 * m, s, t, contour)
    defect = skew_defect(K)
    return pfaffian(0.5 * (K - K.T), tol=1e-12), defect, path


def _check_bosonic_omega(omega):
    w = complex(omega)
    if w.imag < 0:
        raise ValueError("bosonic flavours need Im omega >= 0 (omega + i0 prescription)")
    if w.imag == 0 and w.real < OMEGA_MIN_BOSONIC:
        raise ValueError(f"bosonic flavours need omega >= {OMEGA_MIN_BOSONIC}")
    if abs(w) < OMEGA_MIN_BOSONIC:
        raise ValueError("omega too close to 0")


def z_minus(m: int, omega, contour: quad.HalfLineContour | None = None,
            estimate_error: bool = True) -> PartitionValue:
    """Bosonic partition function ``z_m^(-)(omega)`` (``m <= 2``, ``omega > 0``).

    ``omega`` may carry a non-negative imaginary part; ``omega = i y`` is the
    purely damped probe.
    """
    _check_m(m, MAX_BOSONIC)
    _check_bosonic_omega(omega)
    contour = contour or quad.HalfLineContour()
    s = quad.omega_to_s(omega)
    log_c = log_constant_bosonic(m) + math.lgamma(2 * m + 1)
    pf, defect, _ = _bosonic_pf(m, s, (), contour)
    value = pf * LogScaledComplex(log_c)
    err = 0.0
    if estimate_error:
        ref, _, _ = _bosonic_pf(m, s, (), contour.refined())
        err = abs((ref * LogScaledComplex(log_c)).to_complex() - value.to_complex())
    err += 1e-15 * abs(value.to_complex())
    return PartitionValue(value, err, "pfaffian", notes={"skew_defect": defect})


def z1_closed_forms(omega: float) -> tuple[complex, complex]:
    """One-flavour closed forms.

    ``z_1^(+) = -4 S'(omega) / (pi^2 omega)`` and
    ``z_1^(-) = i/(2 pi omega) [-Ci(pi omega) + i (pi/2 - Si(pi omega))]``.
    """
    if not omega > 0:
        raise ValueError("closed forms need omega > 0")
    kv = sine_kernel(omega)
    zp = -4.0 * kv.s_prime / (math.pi**2 * omega)
    si, ci = sin_cos_integrals(math.pi * omega)
    zm = 1j / (2.0 * math.pi * omega) * complex(-ci, 0.5 * math.pi - si)
    return complex(zp), zm


def z_super(n, omega, rule=None, contour=None, estimate_error: bool = True) -> PartitionValue:
    """Supersymmetric dispatcher: bosonic for ``n < 0``, 1 for ``n = 0``, fermionic for ``n > 0``."""
    n = int(ReplicaIndex(n))
    if n == 0:
        return PartitionValue(LogScaledComplex(0.0), 0.0, "exact", real_even=True)
    if n > 0:
        return z_plus(n, omega, rule, estimate_error)
    return z_minus(-n, omega, contour, estimate_error)


# ---------------------------------------------------------------------------
# tau functions


def _check_bosonic_deformation(t):
    nz = [j for j, tj in enumerate(t, start=1) if tj != 0]
    if not nz:
        return False
    top = nz[-1]
    if t[top - 1] > 0:
        return False
    if max(abs(x) for x in t) <= INFINITESIMAL_T:
        return True
    raise InadmissibleDeformation(
        f"exp(-V) grows on [1, inf): leading coefficient t_{top} = {t[top - 1]:g} must be > 0")


def tau(m: int, point: DeformationPoint, rule=None, contour=None) -> PartitionValue:
    """Supersymmetric tau function ``tau_2m(s; t)``.

    ``m > 0`` uses the weight ``(1 - l^2) exp(2 s l + 2 V)`` with prefactor
    ``1/m!``; ``m < 0`` the weight ``exp(-s l - V)/sqrt(l^2 - 1)`` with
    prefactor ``1/(2|m|)!``; ``tau_0 = 1``. Both prefactors cancel the
    de Bruijn combinatorial factors, so the value is a bare Pfaffian.

    Bosonic deformations whose leading coefficient makes ``exp(-V)`` grow are
    rejected unless they are infinitesimal (``max|t_j| <= 1e-2``); those are
    evaluated on the ray cut at the turning point of the integrand, which
    reproduces every t-derivative at ``t = 0`` up to the reported
    truncation error.

    Raises
    ------
    InadmissibleDeformation
        For a finite, non-integrable bosonic deformation.
    """
    if int(m) != m or abs(m) > MAX_TAU:
        raise ValueError(f"|m| <= {MAX_TAU} for tau functions")
    if not isinstance(point, DeformationPoint):
        point = DeformationPoint(*point)
    if m == 0:
        return PartitionValue(LogScaledComplex(0.0), 0.0, "exact")
    if m > 0:
        pf = _fermionic_pf(m, point.s, point.t, rule)
        return PartitionValue(pf, 1e-15 * abs(pf.to_complex()), "pfaffian")
    # t_1 only shifts s; folding it keeps the admissibility check on higher times
    s_eff = point.s + point.t[0]
    t_eff = (0.0,) + point.t[1:]
    _check_bosonic_deformation(t_eff)
    contour = contour or quad.HalfLineContour()
    pf, defect, path = _bosonic_pf(-m, s_eff, t_eff, contour)
    err = 1e-15 * abs(pf.to_complex()) + path.truncation_error * abs(pf.to_complex())
    return PartitionValue(pf, err, "pfaffian",
                          notes={"skew_defect": defect, "truncated": path.truncated})


def projection_constant(m: int) -> float:
    """Analytic ratio ``z_m(omega) / tau_2m(-i pi omega / 2; 0)``: ``c_m^(+) m!`` or ``c_|m|^(-) (2|m|)!``."""
    if m == 0:
        return 1.0
    if m > 0:
        return math.exp(log_constant_fermionic(m) + math.lgamma(m + 1))
    return math.exp(log_constant_bosonic(-m) + math.lgamma(-2 * m + 1))


def calibrate_projection(m: int, omega: float = 0.7) -> complex:
    """Numerical ratio ``z_m(omega) / tau_2m(s = -i pi omega/2; t = 0)`` at one reference point."""
    z = z_super(m, omega, estimate_error=False).complex_value
    t = tau(m, DeformationPoint.from_omega(omega)).complex_value
    return z / t
