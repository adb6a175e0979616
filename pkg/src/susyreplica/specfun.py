"""Scalar special functions: sine kernel, Si/Ci, half-integer log-gamma sums."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "KernelValue",
    "sine_kernel",
    "sine_kernel_second_derivative",
    "sin_cos_integrals",
    "tail_sine_integral",
    "barnes_g_log_ratio",
]

# |pi*omega| below this uses the Taylor branch
KERNEL_SERIES_CUT = 1e-2


@dataclass(frozen=True)
class KernelValue:
    """Sine kernel ``S(w) = sin(pi w)/(pi w)`` and its derivative in ``w``."""

    s: float | np.ndarray
    s_prime: float | np.ndarray


def _kernel_series(x):
    x2 = x * x
    s = 1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0
    ds = x * (-1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0 + x2 * x2 * x2 / 45360.0)
    return s, ds


def _kernel_direct(x):
    sx, cx = np.sin(x), np.cos(x)
    return sx / x, (x * cx - sx) / (x * x)


def sine_kernel(omega):
    """Evaluate the sine kernel and its first derivative.

    Works on scalars and arrays. Below ``|pi*omega| < 1e-2`` a sixth-order
    Taylor expansion replaces the direct quotient.
    """
    w = np.asarray(omega, dtype=float)
    x = np.pi * w
    small = np.abs(x) < KERNEL_SERIES_CUT
    xs = np.where(small, x, 1.0)
    xd = np.where(small, 1.0, x)
    s_ser, d_ser = _kernel_series(xs)
    s_dir, d_dir = _kernel_direct(xd)
    s = np.where(small, s_ser, s_dir)
    ds = np.pi * np.where(small, d_ser, d_dir)
    if w.ndim == 0:
        return KernelValue(float(s), float(ds))
    return KernelValue(s, ds)


def sine_kernel_second_derivative(omega):
    """``S''(w)``, with the same small-argument switch as :func:`sine_kernel`."""
    w = np.asarray(omega, dtype=float)
    x = np.pi * w
    small = np.abs(x) < KERNEL_SERIES_CUT
    xs = np.where(small, x, 0.0)
    xd = np.where(small, 1.0, x)
    x2 = xs * xs
    ser = -1.0 / 3.0 + x2 / 10.0 - x2 * x2 / 168.0 + x2 * x2 * x2 / 6480.0
    sx, cx = np.sin(xd), np.cos(xd)
    direct = -sx / xd - 2.0 * cx / xd**2 + 2.0 * sx / xd**3
    out = np.pi**2 * np.where(small, ser, direct)
    return float(out) if w.ndim == 0 else out


def sin_cos_integrals(x):
    """Return ``(Si(x), Ci(x))`` for ``x > 0``.

    Backed by the Cephes routines in :func:`scipy.special.sici` (power series
    below x = 4, rational/asymptotic auxiliary functions above).

    Raises
    ------
    ValueError
        If any ``x <= 0``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise ValueError("sin_cos_integrals requires x > 0")
    si, ci = special.sici(xa)
    if xa.ndim == 0:
        return float(si), float(ci)
    return si, ci


def tail_sine_integral(omega):
    """``int_omega^inf sin(pi t)/(pi t) dt = 1/2 - Si(pi omega)/pi`` for omega >= 0."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("tail_sine_integral requires omega >= 0")
    si, _ = special.sici(np.pi * w)
    out = 0.5 - si / np.pi
    return float(out) if w.ndim == 0 else out


def barnes_g_log_ratio(m: int) -> float:
    """``log[G(2m + 3/2) / G(1/2)]`` from ``G(z+1) = Gamma(z) G(z)``.

    The ratio telescopes to ``sum_{j=0}^{2m} log Gamma(j + 1/2)``, so the
    absolute normalisation of G never enters.
    """
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    return math.fsum(math.lgamma(j + 0.5) for j in range(2 * int(m) + 1))
