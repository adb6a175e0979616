"""Skew-symmetric linear algebra: log-scaled Pfaffians and a symmetric eigensolver."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LogScaledComplex",
    "SkewSymmetryError",
    "pfaffian",
    "skew_defect",
    "sym_eigenvalues",
]

MAX_PFAFFIAN_DIM = 64
MAX_EIG_DIM = 2048


class SkewSymmetryError(ValueError):
    """Input violates the skew-symmetry tolerance."""


def _wrap(phase: float) -> float:
    """Wrap to (-pi, pi]."""
    p = math.remainder(phase, 2.0 * math.pi)
    return math.pi if p == -math.pi else p


@dataclass(frozen=True)
class LogScaledComplex:
    """Complex number stored as ``exp(log_magnitude) * exp(i*phase)``.

    Zero is represented by ``log_magnitude == -inf``. ``degenerate`` marks a
    zero produced by a rejected (too small) pivot rather than an exact zero.
    """

    log_magnitude: float
    phase: float = 0.0
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "phase", _wrap(self.phase) if self.log_magnitude > -math.inf else 0.0)

    @classmethod
    def from_complex(cls, z: complex) -> "LogScaledComplex":
        z = complex(z)
        if z == 0:
            return cls.zero()
        return cls(math.log(math.hypot(z.real, z.imag)), math.atan2(z.imag, z.real))

    @classmethod
    def zero(cls, degenerate: bool = False) -> "LogScaledComplex":
        return cls(-math.inf, 0.0, degenerate)

    @property
    def is_zero(self) -> bool:
        return self.log_magnitude == -math.inf

    def to_complex(self) -> complex:
        if self.is_zero:
            return 0j
        return cmath.rect(math.exp(self.log_magnitude), self.phase)

    __complex__ = to_complex

    def log(self) -> complex:
        """Principal complex logarithm."""
        if self.is_zero:
            raise ValueError("log of zero")
        return complex(self.log_magnitude, self.phase)

    def __mul__(self, other):
        if not isinstance(other, LogScaledComplex):
            other = LogScaledComplex.from_complex(other)
        if self.is_zero or other.is_zero:
            return LogScaledComplex.zero(self.degenerate or other.degenerate)
        return LogScaledComplex(self.log_magnitude + other.log_magnitude, self.phase + other.phase)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, LogScaledComplex):
            other = LogScaledComplex.from_complex(other)
        if other.is_zero:
            raise ZeroDivisionError("division by a zero LogScaledComplex")
        if self.is_zero:
            return self
        return LogScaledComplex(self.log_magnitude - other.log_magnitude, self.phase - other.phase)

    def __pow__(self, k: int):
        if self.is_zero:
            if k <= 0:
                raise ZeroDivisionError("non-positive power of zero")
            return self
        return LogScaledComplex(k * self.log_magnitude, k * self.phase)

    def __neg__(self):
        if self.is_zero:
            return self
        return LogScaledComplex(self.log_magnitude, self.phase + math.pi)

    def __repr__(self):
        return f"LogScaledComplex({self.to_complex()!r})"


def skew_defect(a: np.ndarray) -> float:
    """``max|A + A^T| / max|A|`` (0 for the zero matrix)."""
    a = np.asarray(a)
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(a + a.T)) / scale)


def pfaffian(a, tol: float = 1e-13, pivot_tol: float = 1e-13) -> LogScaledComplex:
    """Pfaffian of a complex skew-symmetric matrix.

    Skew-symmetric Gaussian elimination in the Parlett-Reid style: at each
    step the largest entry of the current row is swapped into the
    super-diagonal (each swap flips the sign) and a rank-2 update forms the
    Schur complement. The product of pivots is accumulated in log-scaled form.

    Parameters
    ----------
    a : (2n, 2n) array_like
        Skew-symmetric matrix, ``2n <= 64``.
    tol : float
        Allowed skew-symmetry defect relative to ``max|A|``.
    pivot_tol : float
        Pivots below ``pivot_tol * max|A|`` end the elimination and a
        degenerate zero is returned.
    """
    A = np.array(a, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("pfaffian needs a square matrix")
    n = A.shape[0]
    if n % 2:
        raise ValueError("pfaffian is only defined for even dimension")
    if n > MAX_PFAFFIAN_DIM:
        raise ValueError(f"dimension {n} exceeds {MAX_PFAFFIAN_DIM}")
    if n == 0:
        return LogScaledComplex(0.0, 0.0)
    if skew_defect(A) > tol:
        raise SkewSymmetryError(f"skew-symmetry defect {skew_defect(A):.3e} exceeds {tol:.1e}")
    scale = np.max(np.abs(A))
    if scale == 0:
        return LogScaledComplex.zero()
    threshold = pivot_tol * scale

    log_mag = 0.0
    phase = 0.0
    for k in range(0, n - 1, 2):
        p = k + 1 + int(np.argmax(np.abs(A[k, k + 1:])))
        if p != k + 1:
            A[[k + 1, p], :] = A[[p, k + 1], :]
            A[:, [k + 1, p]] = A[:, [p, k + 1]]
            phase += math.pi
        piv = A[k, k + 1]
        if abs(piv) == 0:
            return LogScaledComplex.zero()
        if abs(piv) < threshold:
            return LogScaledComplex.zero(degenerate=True)
        log_mag += math.log(math.hypot(piv.real, piv.imag))
        phase += math.atan2(piv.imag, piv.real)
        if k + 2 < n:
            r0 = A[k, k + 2:] / piv
            r1 = A[k + 1, k + 2:]
            A[k + 2:, k + 2:] += np.outer(r1, r0) - np.outer(r0, r1)
    return LogScaledComplex(log_mag, phase)


def sym_eigenvalues(h) -> np.ndarray:
    """Ascending eigenvalues of a real symmetric matrix (LAPACK ``syevd``).

    Raises
    ------
    ValueError
        Non-square, non-symmetric, or larger than 2048.
    numpy.linalg.LinAlgError
        If LAPACK does not converge.
    """
    H = np.asarray(h, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("sym_eigenvalues needs a square matrix")
    if H.shape[0] > MAX_EIG_DIM:
        raise ValueError(f"dimension exceeds {MAX_EIG_DIM}")
    if not np.array_equal(H, H.T):
        scale = max(np.max(np.abs(H)), 1.0)
        if np.max(np.abs(H - H.T)) > 1e-12 * scale:
            raise ValueError("matrix is not symmetric")
        H = 0.5 * (H + H.T)
    return np.linalg.eigvalsh(H)
