"""Residual checks for the integrable structure of the replica partition functions.

Three families of identities are checked numerically:

* the omega-space Pfaff-KP recursion linking ``z_{n-1}``, ``z_n`` and
  ``z_{n+1}``, with omega-derivatives from Chebyshev fits;
* the first two Pfaff-KP hierarchy equations for the deformed tau functions;
* the beta = 1 Virasoro constraints.

The last two use nested central differences in the deformation times.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import brentq
from sklearn.base import BaseEstimator

from . import partition as part
from .partition import DeformationPoint
from .quadrature import DEFAULT_FINITE_ORDER, MAX_RULE_ORDER, HalfLineContour, gauss_legendre_rule

__all__ = [
    "ChebyshevFit",
    "ResidualReport",
    "ZeroCrossingError",
    "UnresolvedFitError",
    "chebyshev_nodes",
    "fit_log_z",
    "fit_z",
    "RecursionFits",
    "LogFit",
    "pfkp_residual",
    "TauStencil",
    "pfkp1_residual",
    "pfkp2_residual",
    "virasoro_operator",
    "virasoro_residual",
]

MAX_DEGREE = 256
RESOLUTION_TOL = 1e-10
NORMALIZATION_FLOOR = 1e-300
# 5-point cross-check step for omega-derivatives
CROSSCHECK_STEP = 1e-2
FD_STEP = 1e-3
FD_STEP_HIGH = 2e-2


class ZeroCrossingError(ValueError):
    """The sampled partition function vanishes inside the fit interval."""

    def __init__(self, message, zeros=()):
        super().__init__(message)
        self.zeros = tuple(zeros)


class UnresolvedFitError(ValueError):
    """Chebyshev coefficients have not decayed to the resolution tolerance."""


# ---------------------------------------------------------------------------
# Chebyshev fits


def chebyshev_nodes(interval, degree: int) -> np.ndarray:
    """First-kind Chebyshev points mapped to ``interval``, in ascending order."""
    a, b = interval
    k = np.arange(degree + 1)
    x = -np.cos(np.pi * (k + 0.5) / (degree + 1))
    return 0.5 * (b - a) * (x + 1.0) + a


class ChebyshevFit(BaseEstimator):
    """Chebyshev interpolant of a (complex) function on ``[a, b]``.

    Parameters
    ----------
    degree : int
        Polynomial degree; ``degree + 1`` samples at :func:`chebyshev_nodes`
        give interpolation, more samples a least-squares fit.
    interval : tuple of float
        Fit interval ``(a, b)`` with ``0 < a < b``.
    log : bool
        Informational flag: the fitted samples are ``log z`` rather than ``z``.
    """

    def __init__(self, degree: int = 48, interval=(0.3, 2.0), log: bool = False):
        self.degree = degree
        self.interval = interval
        self.log = log

    def _x(self, omega):
        a, b = self.interval
        return (2.0 * np.asarray(omega, dtype=float) - a - b) / (b - a)

    def fit(self, X, y):
        a, b = self.interval
        if not 0 < a < b:
            raise ValueError("interval must satisfy 0 < a < b")
        if not 1 <= self.degree <= MAX_DEGREE:
            raise ValueError(f"degree must lie in [1, {MAX_DEGREE}]")
        x = self._x(np.ravel(X))
        y = np.asarray(y, dtype=complex)
        if np.any(np.abs(x) > 1 + 1e-12):
            raise ValueError("samples outside the fit interval")
        self.coef_ = cheb.chebfit(x, y, self.degree)
        if np.allclose(self.coef_.imag, 0.0, rtol=0.0, atol=0.0):
            self.coef_ = self.coef_.real
        return self

    @property
    def resolution_(self) -> float:
        """Largest of the last three coefficients relative to the largest coefficient."""
        c = np.abs(self.coef_)
        scale = c.max()
        return 0.0 if scale == 0 else float(c[-3:].max() / scale)

    def predict(self, X, derivative: int = 0):
        """Value or ``derivative``-th omega-derivative at ``X``."""
        if derivative < 0:
            raise ValueError("derivative order must be non-negative")
        a, b = self.interval
        c = cheb.chebder(self.coef_, derivative) if derivative else self.coef_
        out = cheb.chebval(self._x(X), c) * (2.0 / (b - a)) ** derivative
        return out

    def derivative_error(self, derivative: int, sample_error: float = 0.0) -> float:
        """Propagated bound on the ``derivative``-th derivative error.

        Coefficient tail plus the sample error (including rounding in the
        fit itself) amplified by the Markov factor ``degree^(2k)`` and the
        interval scaling ``(2/(b-a))^k``.
        """
        a, b = self.interval
        k = derivative
        j = np.arange(len(self.coef_))
        tail = np.abs(self.coef_[-3:]) * np.maximum(j[-3:], 1.0) ** (2 * k)
        rounding = 10.0 * len(self.coef_) * np.finfo(float).eps * np.abs(self.coef_).max()
        markov = float(max(self.degree, 1)) ** (2 * k)
        return float((tail.sum() + (sample_error + rounding) * markov) * (2.0 / (b - a)) ** k)


def _sample(n: int, omegas, **kw):
    vals = [part.z_super(n, w, **kw) for w in omegas]
    z = np.array([v.complex_value for v in vals])
    err = np.array([v.error_estimate for v in vals])
    return z, err


def _locate_zeros(n, omegas, z):
    """Sign changes of the real fermionic samples, refined by root bracketing."""
    zeros = []
    re = z.real
    for i in np.nonzero(np.sign(re[:-1]) * np.sign(re[1:]) < 0)[0]:
        f = lambda w: part.z_super(n, w, estimate_error=False).complex_value.real
        zeros.append(brentq(f, omegas[i], omegas[i + 1], xtol=1e-12))
    return zeros


@dataclass
class LogFit:
    """Chebyshev fit of ``log z_n`` plus diagnostics."""

    n: int
    fit: ChebyshevFit | None
    sample_error: float
    crosscheck: float = 0.0
    nodes: np.ndarray = field(default=None, repr=False)

    def derivative(self, omega, k: int):
        if self.fit is None:
            return 0.0     # log z_0 = 0
        return self.fit.predict(omega, derivative=k)

    def derivative_error(self, k: int) -> float:
        return 0.0 if self.fit is None else self.fit.derivative_error(k, self.sample_error)


def fit_log_z(n: int, interval, degree: int = 48, check_resolution: bool = True,
              crosscheck: bool = True, **kw) -> LogFit:
    """Spectral fit of ``log z_n`` on ``interval``.

    The phase is unwrapped along the ascending nodes. Zeros of ``z_n`` inside
    the interval (sign changes for the real fermionic branch, phase jumps or
    vanishing modulus otherwise) are located and raised.

    Raises
    ------
    ZeroCrossingError
        If ``z_n`` vanishes inside the interval.
    UnresolvedFitError
        If the trailing coefficients exceed ``1e-10`` of the leading scale.
    """
    n = int(part.ReplicaIndex(n))
    a, b = interval
    if not 0 < a < b:
        raise ValueError("interval must satisfy 0 < a < b")
    if n == 0:
        return LogFit(0, None, 0.0)
    omegas = chebyshev_nodes(interval, degree)
    z, err = _sample(n, omegas, **kw)
    if n > 0:
        zeros = _locate_zeros(n, omegas, z)
        if zeros:
            raise ZeroCrossingError(f"z_{n} vanishes in [{a}, {b}] at {zeros}", zeros)
    mag = np.abs(z)
    if np.any(mag == 0) or np.any(np.abs(np.diff(np.unwrap(np.angle(z)))) > 0.5 * np.pi):
        raise ZeroCrossingError(f"z_{n} has a zero or phase jump in [{a}, {b}]")
    logz = np.log(mag) + 1j * np.unwrap(np.angle(z))
    if n > 0:
        logz = logz.real
    fit = ChebyshevFit(degree, (a, b), log=True).fit(omegas, logz)
    if check_resolution and fit.resolution_ > RESOLUTION_TOL:
        raise UnresolvedFitError(f"log z_{n} fit unresolved: tail/scale = {fit.resolution_:.2e}")
    out = LogFit(n, fit, float(np.max(err / mag)), nodes=omegas)
    if crosscheck:
        out.crosscheck = _fd_crosscheck(n, fit, interval, **kw)
    return out


def _fd_crosscheck(n, fit, interval, **kw) -> float:
    """Largest gap between the fitted first derivative and a 5-point central difference."""
    a, b = interval
    h = min(CROSSCHECK_STEP, 0.05 * (b - a))
    pts = np.linspace(a + 2 * h, b - 2 * h, 7)[1:-1]
    worst = 0.0
    for w in pts:
        f = [part.z_super(n, w + k * h, estimate_error=False).complex_value for k in (-2, -1, 1, 2)]
        z0 = part.z_super(n, w, estimate_error=False).complex_value
        lf = [np.log(v / z0) for v in f]
        fd = (lf[0] - 8 * lf[1] + 8 * lf[2] - lf[3]) / (12 * h)
        worst = max(worst, abs(fd - fit.predict(w, 1)))
    return float(worst)


def fit_z(n: int, interval, degree: int = 48, **kw):
    """Chebyshev fit of the value ``z_n`` itself (zeros allowed); returns ``(fit, sample_error)``."""
    n = int(part.ReplicaIndex(n))
    if n == 0:
        return None, 0.0
    omegas = chebyshev_nodes(interval, degree)
    z, err = _sample(n, omegas, **kw)
    return ChebyshevFit(degree, interval).fit(omegas, z), float(err.max())


# ---------------------------------------------------------------------------
# residual reports


@dataclass
class ResidualReport:
    identity: str
    point: dict
    lhs: complex
    rhs: complex
    normalized_residual: float
    error_budget: float
    passed: bool
    details: dict = field(default_factory=dict)

    @classmethod
    def build(cls, identity, point, lhs, rhs, abs_error, details=None, floor=NORMALIZATION_FLOOR):
        lhs, rhs = complex(lhs), complex(rhs)
        scale = abs(lhs) + abs(rhs) + floor
        res = abs(lhs - rhs) / scale
        budget = float(abs_error / scale)
        return cls(identity, point, lhs, rhs, float(res), budget, bool(res <= budget), details or {})

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("lhs", "rhs"):
            d[key] = [self.__dict__[key].real, self.__dict__[key].imag]
        d["point"] = {k: ([v.real, v.imag] if isinstance(v, complex) else v) for k, v in self.point.items()}
        return d


# ---------------------------------------------------------------------------
# omega-space Pfaff-KP recursion


@dataclass
class RecursionFits:
    """Fits shared by all points of one recursion check at fixed ``n``."""

    n: int
    interval: tuple
    center: LogFit
    lower: tuple        # (ChebyshevFit | None, sample_error)
    upper: tuple

    @classmethod
    def build(cls, n: int, interval, degree: int = 48, **kw) -> "RecursionFits":
        n = int(n)
        if abs(n) > 1:
            raise ValueError("neighbouring flavours beyond |n| = 2 are out of range")
        center = fit_log_z(n, interval, degree, **kw)
        lower = fit_z(n - 1, interval, degree, **kw) if n != 0 else (None, 0.0)
        upper = fit_z(n + 1, interval, degree, **kw) if n != 0 else (None, 0.0)
        return cls(n, tuple(interval), center, lower, upper)


def _value_and_slope(fit_and_err, omega):
    fit, err = fit_and_err
    if fit is None:
        return 1.0, 0.0, 0.0, 0.0
    return (complex(fit.predict(omega)), complex(fit.predict(omega, 1)),
            err + fit.derivative_error(0, 0.0), fit.derivative_error(1, err))


def pfkp_residual(n: int, omega: float, fits: RecursionFits | None = None, gauge: float = 1.0,
                  interval=None, degree: int = 48) -> ResidualReport:
    """Residual of the omega-space Pfaff-KP recursion at ``(n, omega)``.

    ``LHS = (d3 - (2n/w) d2 + (2n/w^2) d1) log z_n + 2 (d1 log z_n)(d2 log z_n)``,
    ``RHS = pi^4 n^2 (2n+1) w (z_{n-1} z_{n+1}/z_n^2)(4n + w d1 log(z_{n+1}/z_{n-1}))``.

    The right-hand side is evaluated in the algebraically equal form
    ``pi^4 n^2 (2n+1) w [4n z_- z_+ + w (z_- z_+' - z_+ z_-')] / z_n^2``, so
    neighbouring flavours may pass through zero. ``gauge`` rescales both
    neighbours (a fault injection that multiplies the RHS by ``gauge^2``).
    """
    n = int(part.ReplicaIndex(n))
    point = {"n": n, "omega": float(omega), "gauge": float(gauge)}
    if n == 0:
        return ResidualReport.build("pfaff-kp-recursion", point, 0.0, 0.0, 0.0)
    if fits is None:
        interval = interval or (0.5 * omega, 1.5 * omega)
        fits = RecursionFits.build(n, interval, degree)
    c = fits.center
    d1, d2, d3 = (complex(c.derivative(omega, k)) for k in (1, 2, 3))
    e1, e2, e3 = (c.derivative_error(k) for k in (1, 2, 3))
    w = float(omega)
    lhs = d3 - (2 * n / w) * d2 + (2 * n / w**2) * d1 + 2 * d1 * d2
    lhs_err = e3 + abs(2 * n / w) * e2 + abs(2 * n / w**2) * e1 + 2 * (abs(d1) * e2 + abs(d2) * e1)

    zm, zm1, ezm, ezm1 = _value_and_slope(fits.lower, w)
    zp, zp1, ezp, ezp1 = _value_and_slope(fits.upper, w)
    zm, zm1, zp, zp1 = gauge * zm, gauge * zm1, gauge * zp, gauge * zp1
    log_zn = complex(c.derivative(w, 0))
    inv_zn2 = np.exp(-2.0 * log_zn)
    pref = math.pi**4 * n * n * (2 * n + 1) * w
    bracket = 4 * n * zm * zp + w * (zm * zp1 - zp * zm1)
    rhs = pref * bracket * inv_zn2
    bracket_err = (4 * abs(n) * (abs(zm) * ezp + abs(zp) * ezm)
                   + w * (abs(zm) * ezp1 + abs(zp1) * ezm + abs(zp) * ezm1 + abs(zm1) * ezp))
    rhs_err = abs(pref * inv_zn2) * (gauge * gauge * bracket_err
                                     + abs(bracket) * 2 * (c.derivative_error(0) + c.sample_error))
    details = {"interval": list(fits.interval), "degree": c.fit.degree,
               "fit_resolution": c.fit.resolution_, "fd_crosscheck": c.crosscheck}
    return ResidualReport.build("pfaff-kp-recursion", point, lhs, rhs, lhs_err + rhs_err, details)


# ---------------------------------------------------------------------------
# deformation-time finite differences

# second-order central stencils: offset -> weight
_STENCILS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


class TauStencil:
    """Cached tau-function samples on the lattice ``t = t0 + h * k``.

    ``derivative(orders)`` applies tensor products of second-order central
    stencils; ``orders[j-1]`` is the derivative order in ``t_j``. With
    ``log=True`` the derivatives act on ``log(tau / tau(t0))``.
    """

    def __init__(self, m: int, point: DeformationPoint, h: float, log: bool = False,
                 contour: HalfLineContour | None = None, rule=None):
        self.m = int(m)
        self.point = point
        self.h = float(h)
        self.log = log
        self.contour = contour
        self.rule = rule
        self._cache: dict[tuple, complex] = {}
        self._base = part.tau(self.m, point, rule=rule, contour=contour).value
        self._rel_noise = None

    @property
    def base(self) -> complex:
        return self._base.to_complex()

    @property
    def rel_noise(self) -> float:
        """Relative accuracy of one tau sample, from a refined re-evaluation at the base point."""
        if self._rel_noise is None:
            if self.m == 0 or self._base.is_zero:
                self._rel_noise = 0.0 if self.m == 0 else math.inf
            else:
                rule = gauss_legendre_rule(min((self.rule or gauss_legendre_rule(DEFAULT_FINITE_ORDER)).order + 32,
                                               MAX_RULE_ORDER))
                contour = (self.contour or HalfLineContour()).refined()
                ref = part.tau(self.m, self.point, rule=rule, contour=contour).value
                self._rel_noise = abs((ref / self._base).to_complex() - 1.0) + 1e-15
        return self._rel_noise

    def noise(self, orders) -> float:
        """Sample inaccuracy propagated through the stencil of ``derivative(orders)``."""
        if self.m == 0:
            return 0.0
        amp = math.prod(sum(abs(w) for w in _STENCILS[o].values()) for o in orders)
        scale = 1.0 if self.log else abs(self.base)
        return self.rel_noise * scale * amp / self.h ** sum(orders)

    def sample(self, offsets: tuple) -> complex:
        key = tuple(offsets)
        while key and key[-1] == 0:
            key = key[:-1]
        if key not in self._cache:
            t = list(self.point.t) + [0.0] * max(0, len(key) - len(self.point.t))
            for j, k in enumerate(key):
                t[j] += k * self.h
            v = part.tau(self.m, DeformationPoint(self.point.s, tuple(t)), rule=self.rule,
                          contour=self.contour).value
            if self.log:
                self._cache[key] = (v / self._base).log() if not v.is_zero else complex("nan")
            else:
                self._cache[key] = v.to_complex()
        return self._cache[key]

    def derivative(self, orders) -> complex:
        orders = tuple(orders)
        if any(o > 4 for o in orders):
            raise ValueError("stencils support derivative orders up to 4")
        stencils = [list(_STENCILS[o].items()) for o in orders]
        total = 0j
        for combo in itertools.product(*stencils):
            offs = tuple(k for k, _ in combo)
            weight = math.prod(wt for _, wt in combo)
            total += weight * self.sample(offs)
        return total / self.h ** sum(orders)


def _orders(*js, size: int = 8) -> tuple:
    o = [0] * size
    for j in js:
        o[j - 1] += 1
    return tuple(o)


def _richardson(f, h: float, point, *, levels: int = 3):
    """Evaluate ``f(h)`` on ``h, h/2, h/4`` and return the extrapolated values.

    ``f`` maps a step to a tuple of complex numbers. Returns
    ``(raw, extrapolated)`` lists indexed by level.
    """
    raw = [np.asarray(f(h / 2**k), dtype=complex) for k in range(levels)]
    ext = [(4.0 * raw[k + 1] - raw[k]) / 3.0 for k in range(levels - 1)]
    return raw, ext


def _measured_order(residuals) -> float:
    d1 = abs(residuals[0] - residuals[1])
    d2 = abs(residuals[1] - residuals[2])
    if d2 == 0 or d1 == 0:
        return math.inf
    return math.log2(d1 / d2)


def _fd_report(identity, point, compute, h, details=None):
    raw, ext = _richardson(compute, h, point)
    lhs, rhs = ext[-1][0], ext[-1][1]
    fd_err = abs(ext[-1][0] - ext[-2][0]) + abs(ext[-1][1] - ext[-2][1])
    # sample noise at the finest step, amplified by the extrapolation weights
    noise = 5.0 / 3.0 * raw[-1][2].real
    raw_res = [r[0] - r[1] for r in raw]
    det = dict(details or {})
    det.update({
        "h": h,
        "measured_order": _measured_order(raw_res),
        "raw_residuals": [abs(r) for r in raw_res],
        "lhs_raw": [complex(r[0]) for r in raw],
        "sample_noise": float(noise),
    })
    # 10x safety on the extrapolation gap
    budget = 10.0 * fd_err + noise + 1e-13 * (abs(lhs) + abs(rhs))
    return ResidualReport.build(identity, point, lhs, rhs, budget, det)


def _neighbour_ratio(m, point, contour, rule=None):
    """``tau_{2m-2} tau_{2m+2} / tau_{2m}^2`` at ``point``."""
    lo = part.tau(m - 1, point, rule=rule, contour=contour).value
    hi = part.tau(m + 1, point, rule=rule, contour=contour).value
    mid = part.tau(m, point, rule=rule, contour=contour).value
    if mid.is_zero:
        raise ZeroDivisionError("tau_2m vanishes at this point")
    return (lo * hi / mid**2).to_complex()


def _check_kp_m(m):
    if abs(int(m)) > 1:
        raise ValueError("|m| <= 1 keeps the neighbouring tau functions at desk scale")


def pfkp1_residual(m: int, s: complex, h: float = FD_STEP_HIGH,
                   contour: HalfLineContour | None = None, rule=None) -> ResidualReport:
    """First Pfaff-KP equation at ``t = 0``.

    ``(d1^4 + 3 d2^2 - 4 d1 d3) log tau + 6 (d1^2 log tau)^2 = 12 tau_{2m-2} tau_{2m+2} / tau_{2m}^2``.
    For ``m = 0`` the left side is identically zero.
    """
    _check_kp_m(m)
    point = DeformationPoint(s)
    rhs = 12.0 * _neighbour_ratio(m, point, contour, rule)
    info = {"m": int(m), "s": complex(s)}
    if m == 0:
        return ResidualReport.build("pfkp1", info, 0.0, rhs, 0.0, {"note": "log tau_0 = 0"})

    def compute(step):
        st = TauStencil(m, point, step, log=True, contour=contour, rule=rule)
        d = lambda *js: st.derivative(_orders(*js))
        n = lambda *js: st.noise(_orders(*js))
        d11 = d(1, 1)
        lhs = d(1, 1, 1, 1) + 3 * d(2, 2) - 4 * d(1, 3) + 6 * d11 * d11
        noise = n(1, 1, 1, 1) + 3 * n(2, 2) + 4 * n(1, 3) + 12 * abs(d11) * n(1, 1)
        return lhs, rhs, noise

    return _fd_report("pfkp1", info, compute, h)


def pfkp2_residual(m: int, s: complex, h: float = FD_STEP_HIGH,
                   contour: HalfLineContour | None = None, rule=None) -> ResidualReport:
    """Second Pfaff-KP equation at ``t = 0``.

    ``(d1^3 d2 - 3 d1 d4 + 2 d2 d3) log tau + 6 (d1^2 log tau)(d1 d2 log tau)
    = 6 (tau_{2m-2} tau_{2m+2}/tau_{2m}^2) d1 log(tau_{2m+2}/tau_{2m-2})``.
    """
    _check_kp_m(m)
    point = DeformationPoint(s)
    ratio = _neighbour_ratio(m, point, contour, rule)
    info = {"m": int(m), "s": complex(s)}

    def compute(step):
        hi = TauStencil(m + 1, point, step, log=True, contour=contour, rule=rule)
        lo = TauStencil(m - 1, point, step, log=True, contour=contour, rule=rule)
        e1 = _orders(1)
        rhs = 6.0 * ratio * (hi.derivative(e1) - lo.derivative(e1))
        rhs_noise = 6.0 * abs(ratio) * (hi.noise(e1) + lo.noise(e1))
        if m == 0:
            return 0.0, rhs, rhs_noise
        st = TauStencil(m, point, step, log=True, contour=contour, rule=rule)
        d = lambda *js: st.derivative(_orders(*js))
        n = lambda *js: st.noise(_orders(*js))
        d11, d12 = d(1, 1), d(1, 2)
        lhs = d(1, 1, 1, 2) - 3 * d(1, 4) + 2 * d(2, 3) + 6 * d11 * d12
        noise = (n(1, 1, 1, 2) + 3 * n(1, 4) + 2 * n(2, 3)
                 + 6 * (abs(d11) * n(1, 2) + abs(d12) * n(1, 1)))
        return lhs, rhs, noise + rhs_noise

    return _fd_report("pfkp2", info, compute, h)


def virasoro_operator(m: int, q: int, s: complex, form: str = "uncorrected"):
    """Terms of the Virasoro constraint at ``t = 0`` split into two sides.

    Returns ``(lhs_terms, rhs_terms)``: lists of ``(coefficient, orders)``
    where ``orders`` indexes derivatives in ``t_1..t_8`` acting on tau; the
    constraint reads ``sum(lhs) = sum(rhs)``. ``d/dt_0`` acts as
    multiplication by ``2m`` and ``t_j`` with ``j < 0`` is absent.

    ``lhs = L_{q+2} + s d_{q+3}`` and
    ``rhs = L_q + s d_{q+1} + (q+2) d_{q+2}`` with
    ``L_p = 1/2 sum_{j=0}^{p} d_j d_{p-j} + 1/2 (p+1) d_p`` (the ``t``-linear
    part of ``L_p`` vanishes at ``t = 0``).

    ``form="corrected"`` adds ``(q+1) d_q`` to the operator (subtracted from
    ``rhs``), which is what the change of variables actually produces.
    """
    if q not in (-1, 0, 1):
        raise ValueError("q must be -1, 0 or 1")
    if form not in ("uncorrected", "corrected"):
        raise ValueError("form is 'uncorrected' or 'corrected'")
    t0 = 2.0 * m

    def term(coef, *js):
        if any(j < 0 for j in js):
            return None
        coef *= t0 ** sum(1 for j in js if j == 0)
        return (coef, _orders(*[j for j in js if j > 0]))

    def L(p):
        out = [term(0.5, j, p - j) for j in range(0, p + 1)]
        out.append(term(0.5 * (p + 1), p))
        return out

    lhs = L(q + 2) + [term(s, q + 3)]
    rhs = L(q) + [term(s, q + 1), term(q + 2.0, q + 2)]
    if form == "corrected":
        rhs.append(term(-(q + 1.0), q))
    clean = lambda ts: [x for x in ts if x is not None and x[0] != 0]
    return clean(lhs), clean(rhs)


def virasoro_residual(m: int, q: int, s: complex, form: str = "uncorrected", h: float = FD_STEP,
                      contour: HalfLineContour | None = None, rule=None) -> ResidualReport:
    """Virasoro constraint of index ``q`` applied to ``tau_2m`` at ``t = 0``.

    Bosonic ``m = -1`` needs a real ``s > 0`` large enough that the
    ``+-h`` deformations stay integrable along the fixed path.
    """
    if abs(int(m)) > 1:
        raise ValueError("|m| <= 1")
    point = DeformationPoint(s)
    lhs_terms, rhs_terms = virasoro_operator(m, q, s, form)
    info = {"m": int(m), "q": int(q), "s": complex(s), "form": form}
    if m == 0:
        lhs = sum(c for c, o in lhs_terms if not any(o))
        rhs = sum(c for c, o in rhs_terms if not any(o))
        return ResidualReport.build("virasoro", info, lhs, rhs, 0.0)

    def compute(step):
        st = TauStencil(m, point, step, log=False, contour=contour, rule=rule)
        side = lambda terms: sum(c * st.derivative(o) for c, o in terms)
        noise = sum(abs(c) * st.noise(o) for c, o in lhs_terms + rhs_terms)
        return side(lhs_terms), side(rhs_terms), noise

    return _fd_report("virasoro", info, compute, h)
