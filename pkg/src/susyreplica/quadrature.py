"""Integration engines for the replica partition functions.

Two families of integrals appear:

* finite-interval moments on [-1, 1] with weight ``(1 - l^2) exp(2 s l + 2 V(t; l))``;
* half-line integrals on [1, inf) with weight
  ``exp(-s l - V(t; l)) / sqrt(l^2 - 1)``, oscillatory when ``s`` is imaginary.

Half-line integrals are taken along the ray ``l = start + exp(-i arg s) r``,
on which ``exp(-s l)`` decays like ``exp(-|s| r)``. The substitution
``r = v**2`` removes the inverse square-root endpoint singularity at l = 1, so
every integrand seen by the Gauss-Legendre panels is smooth. A second,
independent route integrates on the real axis with a finite damping ``eta``
(``omega -> omega + i eta``) and extrapolates ``eta -> 0``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

__all__ = [
    "ConvergenceError",
    "QuadratureRule",
    "PanelRule",
    "HalfLineContour",
    "BosonicPath",
    "gauss_legendre_rule",
    "omega_to_s",
    "deformation_potential",
    "fermionic_moment",
    "fermionic_moments",
    "bosonic_path",
    "bosonic_half_line_partial",
    "bosonic_kernel_matrix",
    "bosonic_debruijn_kernel",
    "real_axis_path",
    "bosonic_half_line_eta",
    "richardson_eta",
    "bosonic_kernel_eta",
    "tensor_symmetric_oracle",
]

MAX_RULE_ORDER = 512
DEFAULT_FINITE_ORDER = 64
DEFAULT_ETA_LADDER = (1e-2, 5e-3, 2.5e-3, 1.25e-3)


class ConvergenceError(RuntimeError):
    """A refinement check (order or truncation doubling) failed."""


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def mapped(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights

    def integrate(self, f, a: float = -1.0, b: float = 1.0):
        x, w = self.mapped(a, b)
        return np.sum(w * f(x))


@lru_cache(maxsize=64)
def gauss_legendre_rule(order: int) -> QuadratureRule:
    """Gauss-Legendre rule of the given order (2 <= order <= 512)."""
    if int(order) != order or not 2 <= order <= MAX_RULE_ORDER:
        raise ValueError(f"rule order must be an integer in [2, {MAX_RULE_ORDER}]")
    x, w = legendre.leggauss(int(order))
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w, int(order))


@lru_cache(maxsize=64)
def _tail_matrix(order: int) -> np.ndarray:
    # M[i, k]: weight of g(x_k) in int_{x_i}^{1} g for the degree order-1 interpolant
    rule = gauss_legendre_rule(order)
    x = rule.nodes
    vander = legendre.legvander(x, order - 1)
    anti = np.empty((order, order))
    for n in range(order):
        c = np.zeros(order)
        c[n] = 1.0
        ci = legendre.legint(c)
        anti[:, n] = legendre.legval(1.0, ci) - legendre.legval(x, ci)
    m = np.linalg.solve(vander.T, anti.T).T
    m.setflags(write=False)
    return m


class PanelRule:
    """Composite Gauss-Legendre rule on consecutive panels with tail integrals.

    ``tail(g)`` returns ``int_{x_k}^{b} g`` at every node ``x_k``, computed
    exactly for the piecewise polynomial interpolant of ``g``.
    """

    def __init__(self, breaks, order: int):
        self.breaks = np.asarray(breaks, dtype=float)
        if np.any(np.diff(self.breaks) <= 0):
            raise ValueError("panel breaks must be strictly increasing")
        self.order = int(order)
        rule = gauss_legendre_rule(self.order)
        a, b = self.breaks[:-1], self.breaks[1:]
        half = 0.5 * (b - a)
        self.nodes = (a[:, None] + half[:, None] * (rule.nodes[None, :] + 1.0)).ravel()
        self.weights = (half[:, None] * rule.weights[None, :]).ravel()
        self._half = half
        self.n_panels = len(half)

    @classmethod
    def concat(cls, rules) -> "PanelRule":
        """Chain panel rules end to end; each keeps its own integration variable."""
        rules = list(rules)
        order = rules[0].order
        if any(r.order != order for r in rules):
            raise ValueError("all panels must share one order")
        out = cls.__new__(cls)
        out.breaks = None
        out.order = order
        out.nodes = np.concatenate([r.nodes for r in rules])
        out.weights = np.concatenate([r.weights for r in rules])
        out._half = np.concatenate([r._half for r in rules])
        out.n_panels = len(out._half)
        return out

    def integrate(self, g) -> complex:
        return np.sum(self.weights * g, axis=-1)

    def panel_integrals(self, g) -> np.ndarray:
        """Integral of ``g`` over each panel separately."""
        g = np.asarray(g)
        return (self.weights * g).reshape(g.shape[:-1] + (self.n_panels, self.order)).sum(axis=-1)

    def tail(self, g) -> np.ndarray:
        g = np.asarray(g)
        q = self.order
        gp = g.reshape(g.shape[:-1] + (self.n_panels, q))
        within = np.einsum("ik,...pk->...pi", _tail_matrix(q), gp) * self._half[:, None]
        totals = np.einsum("k,...pk->...p", gauss_legendre_rule(q).weights, gp) * self._half
        after = np.cumsum(totals[..., ::-1], axis=-1)[..., ::-1]
        after = np.concatenate([after[..., 1:], np.zeros(after.shape[:-1] + (1,))], axis=-1)
        return (within + after[..., None]).reshape(g.shape)


def omega_to_s(omega) -> complex:
    """Spectral parameter ``s = -i pi omega / 2``."""
    return -0.5j * np.pi * complex(omega)


def deformation_potential(t, lam):
    """``V(t; lam) = sum_j t_j lam^j`` with ``t = (t_1, ..., t_K)``."""
    lam = np.asarray(lam)
    out = np.zeros_like(lam, dtype=complex if np.iscomplexobj(lam) else float)
    for j, tj in enumerate(t, start=1):
        if tj != 0:
            out = out + tj * lam**j
    return out


# ---------------------------------------------------------------------------
# finite interval


def fermionic_moments(kmax: int, s: complex, t=(), rule: QuadratureRule | None = None) -> np.ndarray:
    """``nu_k = int_{-1}^{1} (1-l^2) l^k exp(2 s l + 2 V(t; l)) dl`` for ``k = 0..kmax``."""
    rule = rule or gauss_legendre_rule(DEFAULT_FINITE_ORDER)
    x, w = rule.nodes, rule.weights
    expo = 2.0 * s * x + 2.0 * deformation_potential(t, x)
    base = w * (1.0 - x * x) * np.exp(expo)
    powers = x[None, :] ** np.arange(kmax + 1)[:, None]
    return powers @ base.astype(complex)


def fermionic_moment(k: int, omega: float, rule: QuadratureRule | None = None) -> complex:
    """``mu_k(omega) = int_{-1}^{1} (1 - l^2) l^k exp(-i pi omega l) dl``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return complex(fermionic_moments(k, omega_to_s(omega), (), rule)[k])


# ---------------------------------------------------------------------------
# rotated half-line contour


@dataclass(frozen=True)
class HalfLineContour:
    """Parameters of the rotated half-line path.

    The path is ``l = start + exp(-i arg s) * u * scale`` with
    ``scale = 1/|s|`` (``2/(pi omega)`` on the imaginary-s line), so the
    exponential factor decays as ``exp(-u)``; ``u`` runs to ``u_max``.
    ``eta`` is the damping used only by the real-axis oracle.
    """

    order: int = 24
    panels: int = 8
    u_max: float = 40.0
    eta: float = 0.0

    def __post_init__(self):
        if self.u_max <= 0 or self.panels < 1 or self.eta < 0:
            raise ValueError("invalid contour parameters")
        gauss_legendre_rule(self.order)

    def refined(self) -> "HalfLineContour":
        """Doubled order and doubled truncation, for convergence checks."""
        return HalfLineContour(min(2 * self.order, MAX_RULE_ORDER), self.panels, 2 * self.u_max, self.eta)


@dataclass
class BosonicPath:
    """Nodes ``lam`` on the rotated path with weights ``w`` such that
    ``sum(w * g(lam)) ~ int_start^inf g(l) exp(-s l - V) / sqrt(l^2 - 1) dl``."""

    lam: np.ndarray
    w: np.ndarray
    rule: PanelRule
    truncated: bool = False
    truncation_error: float = 0.0
    direction: complex = 1.0

    def tail(self, g) -> np.ndarray:
        return self.rule.tail(self.w * g)


def _check_s(s: complex) -> complex:
    s = complex(s)
    if s == 0 or s.real < -1e-14 * abs(s):
        raise ValueError("half-line integrals need s != 0 with Re s >= 0 (omega + i0 prescription)")
    return s


def bosonic_path(s: complex, contour: HalfLineContour | None = None, t=(), start: complex = 1.0) -> BosonicPath:
    """Build the rotated half-line path for spectral parameter ``s``.

    If the leading deformation time is positive the ray is turned into the
    sector where ``exp(-V)`` also decays. If it is negative ``exp(-V)``
    eventually grows along the ray; the path is then cut at the first minimum
    of ``Re(-s l - V)`` and ``truncated`` is set, with the relative size of
    the integrand at the cut reported as ``truncation_error``.
    """
    contour = contour or HalfLineContour()
    s = _check_s(s)
    direction = np.exp(-1j * np.angle(s))
    a = abs(s)
    vmax = math.sqrt(contour.u_max / a)
    truncated = False
    trunc_err = 0.0
    lead = _leading_time(t)
    if lead is not None and lead[1] > 0:
        direction, length = _confining_ray(s, t, lead[0], complex(start), contour.u_max)
        vmax = math.sqrt(length)
    elif lead is not None:
        v = np.linspace(0.0, vmax, 4001)
        lam = start + direction * v * v
        expo = np.real(-s * lam - deformation_potential(t, lam))
        rising = np.nonzero(np.diff(expo) > 0)[0]
        if rising.size:
            cut = rising[0]
            vmax = max(v[cut], v[1])
            truncated = True
            trunc_err = float(np.exp(expo[cut] - expo[0]))
    breaks = np.linspace(0.0, vmax, contour.panels + 1)
    rule = PanelRule(breaks, contour.order)
    v = rule.nodes
    r = v * v
    lam = start + direction * r
    expo = -s * lam - deformation_potential(t, lam)
    if complex(start) == 1.0:
        # sqrt(l - 1) = sqrt(direction) * v cancels the Jacobian 2 v direction
        w = 2.0 * np.sqrt(direction) * np.exp(expo) / np.sqrt(lam + 1.0)
    else:
        w = 2.0 * direction * v * np.exp(expo) / (np.sqrt(lam - 1.0) * np.sqrt(lam + 1.0))
    return BosonicPath(lam, w, rule, truncated, trunc_err, direction)


def _leading_time(t):
    nz = [(j, tj) for j, tj in enumerate(t, start=1) if tj != 0]
    return nz[-1] if nz else None


def _confining_ray(s: complex, t, degree: int, start: complex, u_max: float) -> tuple[complex, float]:
    """Ray direction and length for a deformation with positive leading time.

    The angle is the midpoint of the sector where both ``exp(-s l)`` and
    ``exp(-t_K l^K)`` decay; the ray runs until ``Re(-s l - V)`` has dropped
    by ``u_max`` below its starting value.
    """
    arg_s = float(np.angle(s))
    half = 0.5 * math.pi / degree
    lo, hi = max(-arg_s - 0.5 * math.pi, -half), min(-arg_s + 0.5 * math.pi, half)
    direction = np.exp(0.5j * (lo + hi))
    base = float(np.real(-s * start - deformation_potential(t, start)))
    r = 1.0 / abs(s)
    for _ in range(400):
        lam = start + direction * r
        if float(np.real(-s * lam - deformation_potential(t, lam))) - base < -u_max:
            return direction, r
        r *= 1.1
    raise ConvergenceError("deformed half-line weight does not decay along the chosen ray")


def _half_line_partial_s(j: int, s: complex, lam0: float, contour: HalfLineContour) -> complex:
    path = bosonic_path(s, contour, (), lam0)
    return complex(path.rule.integrate(path.w * path.lam**j))


def bosonic_half_line_partial(j: int, omega, lam0: float = 1.0, contour: HalfLineContour | None = None,
                              tol: float = 1e-7, check: bool = True) -> complex:
    """``F_j(lam0) = int_{lam0}^inf l^j exp(i pi omega l / 2) / sqrt(l^2 - 1) dl``.

    ``omega`` may be complex with ``Im omega >= 0``; a purely imaginary
    ``omega = i y`` gives a real, exponentially damped integral.

    Raises
    ------
    ConvergenceError
        If doubling the rule order and ``u_max`` moves the result by more
        than ``tol`` (relative to ``max(1, |F|)``).
    """
    if j < 0 or lam0 < 1:
        raise ValueError("need j >= 0 and lam0 >= 1")
    contour = contour or HalfLineContour()
    s = omega_to_s(omega)
    val = _half_line_partial_s(j, s, lam0, contour)
    if check:
        ref = _half_line_partial_s(j, s, lam0, contour.refined())
        if abs(ref - val) > tol * max(1.0, abs(ref)):
            raise ConvergenceError(f"half-line partial F_{j}({lam0}) unresolved: change {abs(ref - val):.2e}")
    return val


def bosonic_kernel_matrix(size: int, s: complex, t=(), contour: HalfLineContour | None = None) -> tuple[np.ndarray, BosonicPath]:
    """de Bruijn kernel ``K_ij = int int sgn(mu - l) l^(i-1) mu^(j-1) w(l) w(mu)``.

    Evaluated as ``int l^(i-1) w(l) [2 F_j(l) - F_j(1)] dl`` on the rotated
    path, with the inner partials ``F_j`` from the panel tail integrals.
    The raw (unsymmetrised) matrix is returned so that callers can inspect
    its skew-symmetry defect.
    """
    contour = contour or HalfLineContour()
    path = bosonic_path(s, contour, t)
    powers = path.lam[None, :] ** np.arange(size)[:, None]
    tails = path.tail(powers)            # F_j(l_k)
    full = path.rule.integrate(path.w * powers)   # F_j(1)
    inner = 2.0 * tails - full[:, None]
    K = (powers * path.w * path.rule.weights) @ inner.T
    return K, path


def bosonic_debruijn_kernel(i: int, j: int, omega: float, contour: HalfLineContour | None = None) -> complex:
    """Single entry ``K_ij(omega)`` (1-based indices) on the imaginary-s line."""
    if i < 1 or j < 1:
        raise ValueError("kernel indices are 1-based")
    K, _ = bosonic_kernel_matrix(max(i, j), omega_to_s(omega), (), contour)
    return complex(K[i - 1, j - 1])


# ---------------------------------------------------------------------------
# real-axis oracle with finite damping


@dataclass
class _RealAxisPath:
    lam: np.ndarray
    w: np.ndarray
    rule: PanelRule

    def tail(self, g):
        return self.rule.tail(self.w * g)


def real_axis_path(omega: float, eta: float, lam0: float = 1.0, order: int = 12,
                   decay: float = 45.0, jmax: int = 0) -> _RealAxisPath:
    """Real-axis panels for the damped weight ``exp(i pi (omega + i eta) l/2)/sqrt(l^2-1)``.

    Independent of the contour rotation. The first unit interval uses
    ``l = lam0 + v^2``; afterwards panels are half an oscillation period long.
    The axis is cut where ``l^jmax exp(-pi eta l / 2)`` has fallen by
    ``exp(-decay)`` below its maximum.
    """
    if omega <= 0 or eta <= 0:
        raise ValueError("real-axis oracle needs omega > 0 and eta > 0")
    damp = 0.5 * np.pi * eta
    peak = jmax / damp
    length = peak + (decay + jmax * math.log(max(2.0, decay / max(jmax, 1)))) / damp
    period = 4.0 / omega
    # singular segment [lam0, lam0 + 1] in v = sqrt(l - lam0)
    head = PanelRule(np.linspace(0.0, 1.0, 3), order)
    n_tail = max(1, int(math.ceil((length - 1.0) / (0.5 * period))))
    tail_rule = PanelRule(np.linspace(lam0 + 1.0, lam0 + length, n_tail + 1), order)
    v = head.nodes
    lam_h = lam0 + v * v
    s = omega_to_s(complex(omega, eta))
    if lam0 == 1.0:
        w_h = 2.0 * np.exp(-s * lam_h) / np.sqrt(lam_h + 1.0)
    else:
        w_h = 2.0 * v * np.exp(-s * lam_h) / np.sqrt(lam_h * lam_h - 1.0)
    lam_t = tail_rule.nodes
    w_t = np.exp(-s * lam_t) / np.sqrt(lam_t * lam_t - 1.0)
    rule = PanelRule.concat([head, tail_rule])
    return _RealAxisPath(np.concatenate([lam_h, lam_t]), np.concatenate([w_h, w_t]), rule)


def bosonic_half_line_eta(j: int, omega: float, eta: float, lam0: float = 1.0, return_error: bool = False):
    """Damped real-axis value of ``F_j(lam0)`` at ``omega + i eta``.

    With ``return_error`` a roundoff estimate is returned as well: for small
    ``eta`` the axis is long and the oscillatory sum cancels by many orders
    of magnitude, so ``4 eps sum|terms|`` rather than ``eps |F|`` is the
    relevant size.
    """
    path = real_axis_path(omega, eta, lam0, jmax=j)
    terms = path.rule.weights * path.w * path.lam**j
    value = complex(np.sum(terms))
    if return_error:
        return value, float(4.0 * np.finfo(float).eps * np.abs(terms).sum())
    return value


def richardson_eta(values, etas, return_error: bool = False, sample_errors=None):
    """Polynomial extrapolation to ``eta = 0`` through the ladder values.

    With ``return_error`` the change caused by dropping the largest ``eta``
    is returned as an error estimate, plus ``sample_errors`` (one per rung)
    propagated through the extrapolation weights when given.
    """
    etas = np.asarray(etas, dtype=float)
    vals = np.asarray(values, dtype=complex)
    if len(etas) < 2 or np.any(np.diff(etas) >= 0):
        raise ValueError("eta ladder must be strictly decreasing with >= 2 entries")
    # Lagrange basis evaluated at 0
    basis = np.ones(len(etas))
    for i, ei in enumerate(etas):
        for k, ek in enumerate(etas):
            if k != i:
                basis[i] *= ek / (ek - ei)
    out = np.tensordot(basis, vals, axes=1)
    out = complex(out) if out.ndim == 0 else out
    if return_error:
        drop = richardson_eta(vals[1:], etas[1:]) if len(etas) > 2 else vals[-1]
        err = np.max(np.abs(out - drop))
        if sample_errors is not None:
            err += float(np.sum(np.abs(basis) * np.asarray(sample_errors, dtype=float)))
        return out, float(err)
    return out


def bosonic_kernel_eta(size: int, omega: float, eta: float) -> np.ndarray:
    """Kernel matrix on the damped real axis (oracle route, no rotation).

    Limited to ``size <= 3``: with higher powers the eta expansion of the
    damped entries grows too fast for the ladder extrapolation to converge.
    """
    if not 1 <= size <= 3:
        raise ValueError("damped kernel route supports 1 <= size <= 3")
    path = real_axis_path(omega, eta, jmax=2 * size)
    powers = path.lam[None, :] ** np.arange(size)[:, None]
    tails = path.tail(powers)
    full = path.rule.integrate(path.w * powers)
    inner = 2.0 * tails - full[:, None]
    return (powers * path.w * path.rule.weights) @ inner.T


# ---------------------------------------------------------------------------
# brute-force oracles


def _ordered_simplex_vandermonde(path, nvar: int) -> complex:
    """``int_{l_1 < ... < l_n} prod_{j>k}(l_j - l_k) prod w(l_k)`` by expanding the
    Vandermonde determinant over permutations and nesting tail integrals."""
    total = 0j
    for perm in itertools.permutations(range(nvar)):
        sign = _perm_sign(perm)
        # innermost variable is the largest one
        acc = np.ones_like(path.lam)
        for k in reversed(range(nvar)):
            g = path.lam ** perm[k] * acc
            if k == 0:
                acc_val = path.rule.integrate(path.w * g)
            else:
                acc = path.tail(g)
        total += sign * acc_val
    return total


def _perm_sign(perm) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def tensor_symmetric_oracle(kind: str, m: int, omega: float, order: int = 32,
                            etas=DEFAULT_ETA_LADDER, tol: float | None = None, return_error: bool = False):
    """Brute-force value of the replica partition function (constants included).

    ``kind="fermionic"``: tensor-product Gauss-Legendre over ``[-1, 1]^m`` of
    ``prod (1 - l^2) exp(-i pi omega l) |Delta|^4`` (m <= 3, order <= 48).

    ``kind="bosonic"``: the ``2m``-dimensional integral with ``|Delta|`` on the
    damped real axis at each ``eta`` of the ladder, then extrapolated to
    ``eta -> 0`` (``return_error`` adds the extrapolation error estimate). The symmetric domain is reduced to the ordered simplex
    (factor ``(2m)!``) and the Vandermonde is expanded over permutations, so no
    Pfaffian and no contour rotation is involved (m <= 2).

    With ``tol`` set, the fermionic value is recomputed at ``order + 16`` and
    a :class:`ConvergenceError` raised if it moves by more than ``tol``.
    """
    from .partition import constant_bosonic, constant_fermionic

    if kind == "fermionic":
        if not 1 <= m <= 3:
            raise ValueError("fermionic oracle supports 1 <= m <= 3")
        if order > 48:
            raise ValueError("oracle order capped at 48 per axis")
        c = constant_fermionic(m)
        val = _fermionic_tensor(m, omega, order)
        err = 0.0
        if tol is not None:
            ref = _fermionic_tensor(m, omega, min(order + 16, 64))
            err = c * abs(ref - val)
            if abs(ref - val) > tol * max(1.0, abs(ref)):
                raise ConvergenceError("fermionic tensor oracle unresolved")
        return (c * val, err) if return_error else c * val
    if kind == "bosonic":
        if not 1 <= m <= 2:
            raise ValueError("bosonic oracle supports 1 <= m <= 2")
        if omega <= 0:
            raise ValueError("bosonic oracle needs omega > 0")
        n = 2 * m
        vals = []
        for eta in etas:
            path = real_axis_path(omega, eta, jmax=n)
            vals.append(math.factorial(n) * _ordered_simplex_vandermonde(path, n))
        c = constant_bosonic(m)
        val, err = richardson_eta(vals, etas, return_error=True)
        return (c * val, c * err) if return_error else c * val
    raise ValueError("kind must be 'fermionic' or 'bosonic'")


def _fermionic_tensor(m: int, omega: float, order: int) -> complex:
    rule = gauss_legendre_rule(order)
    x, w = rule.nodes, rule.weights
    f = w * (1.0 - x * x) * np.exp(-1j * np.pi * omega * x)
    grids = np.meshgrid(*([x] * m), indexing="ij")
    vand = np.ones(grids[0].shape)
    for a in range(m):
        for b in range(a + 1, m):
            vand = vand * (grids[a] - grids[b]) ** 4
    weight = np.ones(grids[0].shape, dtype=complex)
    for a in range(m):
        shape = [1] * m
        shape[a] = order
        weight = weight * f.reshape(shape)
    return complex(np.sum(weight * vand))
