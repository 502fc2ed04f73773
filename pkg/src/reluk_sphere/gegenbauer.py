"""Normalized Gegenbauer (Legendre) polynomials on S^d.

``p_m`` is the zonal kernel of degree-m harmonics under the normalized surface
measure, so ``p_m(1) = N(m)`` and ``int p_m^2 dmu = N(m)`` where ``mu`` is the
projection of the normalized measure onto [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import betaln

__all__ = [
    "harmonic_dimension",
    "recurrence_a",
    "recurrence_b",
    "RecurrenceCoefficients",
    "PolynomialLadder",
    "ladder_eval",
    "ladder_values",
    "gauss_legendre_panels",
    "projected_quadrature",
    "projected_mass",
]

_INT64_MAX = 2**63 - 1
_T_TOL = 1e-12


def _check_d(d: int) -> None:
    if int(d) != d or d < 1:
        raise ValueError(f"sphere dimension d must be a positive integer, got {d!r}")


def harmonic_dimension(d: int, m: int, *, native: bool = False) -> int:
    """Dimension N(m) of degree-m spherical harmonics on S^d.

    Computed in exact integer arithmetic. With ``native=True`` a result that
    does not fit in a signed 64-bit integer raises ``OverflowError``.
    """
    _check_d(d)
    if int(m) != m or m < 0:
        raise ValueError(f"degree m must be a nonnegative integer, got {m!r}")
    m = int(m)
    if m == 0:
        return 1
    # (2m+d-1)/m * C(m+d-2, d-1) is an integer; multiply before dividing
    num = (2 * m + d - 1) * math.comb(m + d - 2, d - 1)
    value, rem = divmod(num, m)
    assert rem == 0
    if native and value > _INT64_MAX:
        raise OverflowError(f"N({m}) on S^{d} exceeds the int64 range")
    return value


def harmonic_dimensions(d: int, M: int) -> np.ndarray:
    """N(0..M) as float64 (exact up to 2**53)."""
    return np.array([float(harmonic_dimension(d, m)) for m in range(M + 1)])


def recurrence_a(d: int, t: int) -> float:
    """Coefficient of p_{t+1} in t*p_t; zero for negative t."""
    if t < 0:
        return 0.0
    return (t + 1) / (2 * t + d + 1)


def recurrence_b(d: int, t: int) -> float:
    """Coefficient of p_{t-1} in t*p_t; zero for t <= 0.

    Fixed by symmetry of multiplication by t: b_t N(t-1) = a_{t-1} N(t).
    This equals (t+d-2)/(2t+d-3) except at d=1, t=1 where b_1 = 1.
    """
    if t <= 0:
        return 0.0
    if d == 1 and t == 1:
        return 1.0
    return (t + d - 2) / (2 * t + d - 3)


@dataclass(frozen=True)
class RecurrenceCoefficients:
    d: int

    def a(self, t: int) -> float:
        return recurrence_a(self.d, t)

    def b(self, t: int) -> float:
        return recurrence_b(self.d, t)


@dataclass(frozen=True)
class PolynomialLadder:
    d: int
    t: float
    values: np.ndarray  # p_0(t) .. p_M(t)

    @property
    def M(self) -> int:
        return len(self.values) - 1


def _check_t(t: np.ndarray) -> np.ndarray:
    if np.any(~np.isfinite(t)) or np.any(np.abs(t) > 1.0 + _T_TOL):
        raise ValueError("argument must lie in [-1, 1]")
    return np.clip(t, -1.0, 1.0)


def ladder_values(d: int, M: int, t) -> np.ndarray:
    """Array of shape (M+1, *t.shape) with p_m(t) by forward recurrence.

    Long-double input is evaluated in long double.
    """
    _check_d(d)
    if M < 0:
        raise ValueError("M must be nonnegative")
    t = np.asarray(t)
    dtype = np.longdouble if t.dtype == np.longdouble else float
    t = _check_t(t.astype(dtype))
    out = np.empty((M + 1,) + t.shape, dtype=dtype)
    out[0] = 1.0
    if M >= 1:
        out[1] = (d + 1) * t
    for m in range(1, M):
        a = dtype(m + 1) / dtype(2 * m + d + 1)
        b = dtype(1) if (d == 1 and m == 1) else dtype(m + d - 2) / dtype(2 * m + d - 3)
        out[m + 1] = (t * out[m] - b * out[m - 1]) / a
    return out


def ladder_eval(d: int, M: int, t: float) -> PolynomialLadder:
    values = ladder_values(d, M, float(t))
    return PolynomialLadder(d=d, t=float(t), values=values)


def _leggauss_longdouble(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule refined to long-double accuracy by Newton steps."""
    x0, _ = np.polynomial.legendre.leggauss(order)
    x = x0.astype(np.longdouble)
    for _ in range(3):
        p_prev = np.ones_like(x)
        p = x.copy()
        for j in range(1, order):
            p_prev, p = p, ((2 * j + 1) * x * p - j * p_prev) / (j + 1)
        dp = order * (x * p - p_prev) / (x * x - 1)
        x = x - p / dp
    p_prev = np.ones_like(x)
    p = x.copy()
    for j in range(1, order):
        p_prev, p = p, ((2 * j + 1) * x * p - j * p_prev) / (j + 1)
    dp = order * (x * p - p_prev) / (x * x - 1)
    w = 2 / ((1 - x * x) * dp * dp)
    return x, w


def gauss_legendre_panels(a: float, b: float, panels: int, nodes_per_panel: int,
                          extended: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [a, b] with equal panels.

    ``extended=True`` returns long-double nodes and weights.
    """
    if panels < 1 or nodes_per_panel < 1:
        raise ValueError("panels and nodes_per_panel must be >= 1")
    if extended:
        if nodes_per_panel < 2:
            raise ValueError("extended rule needs nodes_per_panel >= 2")
        x, w = _leggauss_longdouble(nodes_per_panel)
        a, b = np.longdouble(a), np.longdouble(b)
    else:
        x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = a + (b - a) * np.arange(panels + 1) / panels
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()


def projected_mass(d: int) -> float:
    """int_{-1}^{1} (1-t^2)^{(d-2)/2} dt = B(1/2, d/2)."""
    _check_d(d)
    return math.exp(betaln(0.5, 0.5 * d))


def projected_quadrature(d: int, f: Callable[[np.ndarray], np.ndarray],
                         panels: int = 256, nodes_per_panel: int = 64,
                         lo: float = -1.0, hi: float = 1.0) -> float:
    """Average of f against the projected sphere measure on [lo, hi].

    Returns int_lo^hi f(t) (1-t^2)^{(d-2)/2} dt / B(1/2, d/2). The weight is
    folded in through t = cos(phi), where it becomes sin(phi)^{d-1} and the
    d=1 endpoint singularity disappears.
    """
    _check_d(d)
    if not -1.0 <= lo <= hi <= 1.0:
        raise ValueError("need -1 <= lo <= hi <= 1")
    phi, w = gauss_legendre_panels(math.acos(hi), math.acos(lo), panels, nodes_per_panel)
    vals = np.asarray(f(np.cos(phi)), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("integrand returned non-finite values")
    integrand = vals * np.sin(phi) ** (d - 1) * w
    return math.fsum(integrand) / projected_mass(d)
