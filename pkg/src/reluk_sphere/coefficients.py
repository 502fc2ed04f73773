"""Legendre coefficients of ReLU^k on S^d and the squared-coefficient tables.

The mass kernel is ``sum_m xi(m) p_m(t)`` with ``xi(m) = sigma_hat(m)^2``;
the order-s stiffness kernel ``(k)_s^2 t^s * [mass kernel of order k-s]`` is
re-expanded in the same basis by applying multiplication-by-t s times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import betaln, gammaln

from .gegenbauer import (
    gauss_legendre_panels,
    harmonic_dimension,
    ladder_values,
    recurrence_a,
    recurrence_b,
)

__all__ = [
    "CoefficientTable",
    "BandIndex",
    "active_set",
    "in_active_set",
    "falling_factorial",
    "sigma_hat",
    "xi_large",
    "xi_table",
    "xi_s_table",
    "coefficient_oracle",
    "OracleResult",
    "band_index",
    "default_mmax",
]


def _validate(d: int, k: int, m: int | None = None) -> None:
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    if m is not None and (int(m) != m or m < 0):
        raise ValueError(f"m must be a nonnegative integer, got {m!r}")


def in_active_set(k: int, m: int) -> bool:
    """m belongs to E = {0..k} u {k+1, k+3, ...}."""
    return m <= k or (m - k - 1) % 2 == 0


def active_set(k: int, M_max: int) -> np.ndarray:
    return np.array([in_active_set(k, m) for m in range(M_max + 1)], dtype=bool)


def falling_factorial(k: int, s: int) -> int:
    return math.perm(k, s)


def _log_prefactor(d: int, k: int) -> float:
    # log of (omega_{d-1}/omega_d) * k! * Gamma(d/2) / (2^{k+1} sqrt(pi))
    log_ratio = gammaln((d + 1) / 2) - 0.5 * math.log(math.pi) - gammaln(d / 2)
    return (log_ratio + gammaln(k + 1) + gammaln(d / 2)
            - (k + 1) * math.log(2.0) - 0.5 * math.log(math.pi))


@lru_cache(maxsize=None)
def _monomial_coefficients(d: int, m: int) -> tuple[Fraction, ...]:
    """Exact power-basis coefficients of p_m (index j multiplies t^j)."""
    def a(t):
        return Fraction(0) if t < 0 else Fraction(t + 1, 2 * t + d + 1)

    def b(t):
        if t <= 0:
            return Fraction(0)
        if d == 1 and t == 1:
            return Fraction(1)
        return Fraction(t + d - 2, 2 * t + d - 3)

    prev: list[Fraction] = []
    cur = [Fraction(1)]
    for t in range(m):
        nxt = [Fraction(0)] * (len(cur) + 1)
        for j, c in enumerate(cur):
            nxt[j + 1] += c
        for j, c in enumerate(prev):
            nxt[j] -= b(t) * c
        nxt = [c / a(t) for c in nxt]
        prev, cur = cur, nxt
    return tuple(cur)


def _half_moment(d: int, a: int) -> float:
    """int_0^1 t^a (1-t^2)^{(d-2)/2} dt = B((a+1)/2, d/2) / 2."""
    return 0.5 * math.exp(betaln((a + 1) / 2, d / 2))


def _sigma_hat_low(d: int, k: int, m: int) -> float:
    coeffs = _monomial_coefficients(d, m)
    num = math.fsum(float(c) * _half_moment(d, j + k) for j, c in enumerate(coeffs) if c)
    den = harmonic_dimension(d, m) * math.exp(betaln(0.5, d / 2))
    return num / den


def sigma_hat(d: int, k: int, m: int) -> float:
    """Legendre coefficient of sigma_k(t) = max(0, t)^k in the p_m basis."""
    _validate(d, k, m)
    if m <= k:
        return _sigma_hat_low(d, k, m)
    if (m - k) % 2 == 0:
        return 0.0
    sign = -1.0 if ((m - k - 1) // 2) % 2 else 1.0
    log_ratio = (math.log(math.factorial(k)) - m * math.log(2.0) + gammaln(d / 2) + gammaln(m - k)
                 - gammaln((m - k + 1) / 2) - gammaln((m + d + k + 1) / 2))
    log_ratio += gammaln((d + 1) / 2) - 0.5 * math.log(math.pi) - gammaln(d / 2)
    return sign * math.exp(log_ratio)


def xi_large(d: int, k: int, t) -> np.ndarray:
    """Squared-Gamma-ratio form of xi on t >= k+1 (vectorized over t)."""
    t = np.asarray(t, dtype=float)
    log_val = 2.0 * (_log_prefactor(d, k) + gammaln((t - k) / 2) - gammaln((t + d + k + 1) / 2))
    return np.exp(log_val)


@dataclass
class CoefficientTable:
    d: int
    k: int
    s: int
    values: np.ndarray
    active_mask: np.ndarray

    @property
    def M_max(self) -> int:
        return len(self.values) - 1

    @property
    def decay_exponent(self) -> int:
        return self.d + 2 * (self.k - self.s) + 1

    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active_mask)


def _mass_values(d: int, k: int, M: int) -> np.ndarray:
    vals = np.zeros(M + 1)
    low = min(k, M)
    for m in range(low + 1):
        vals[m] = sigma_hat(d, k, m) ** 2
    if M >= k + 1:
        idx = np.arange(k + 1, M + 1, 2)
        vals[idx] = xi_large(d, k, idx)
    return vals


def xi_table(d: int, k: int, M_max: int) -> CoefficientTable:
    _validate(d, k)
    if M_max < k + 1:
        raise ValueError(f"M_max must be at least k+1 = {k + 1}")
    return CoefficientTable(d=d, k=k, s=0, values=_mass_values(d, k, M_max),
                            active_mask=active_set(k, M_max))


def xi_s_table(d: int, k: int, s: int, M_max: int) -> CoefficientTable:
    """Stiffness table by s applications of the multiplication-by-t map."""
    _validate(d, k)
    if int(s) != s or s < 0:
        raise ValueError(f"s must be a nonnegative integer, got {s!r}")
    if s > k:
        raise ValueError(f"stiffness order s={s} exceeds activation order k={k}")
    if M_max < k + 1:
        raise ValueError(f"M_max must be at least k+1 = {k + 1}")
    if s == 0:
        return xi_table(d, k, M_max)
    L = M_max + s
    cur = falling_factorial(k, s) ** 2 * _mass_values(d, k - s, L)
    a = np.array([recurrence_a(d, t) for t in range(L + 2)])
    b = np.array([recurrence_b(d, t) for t in range(L + 2)])
    for _ in range(s):
        nxt = np.zeros_like(cur)
        # xi_r(t) = a_{t-1} xi_{r-1}(t-1) + b_{t+1} xi_{r-1}(t+1)
        nxt[1:] += a[:L] * cur[:-1]
        nxt[:-1] += b[1:L + 1] * cur[1:]
        cur = nxt
    vals = cur[:M_max + 1].copy()
    mask = active_set(k, M_max)
    vals[~mask] = 0.0
    return CoefficientTable(d=d, k=k, s=s, values=vals, active_mask=mask)


@dataclass
class BandIndex:
    d: int
    k: int
    degrees: np.ndarray  # elements of E up to M_max
    cumulative: np.ndarray  # d_m for each listed degree

    def __getitem__(self, m: int) -> int:
        pos = np.searchsorted(self.degrees, m)
        if pos >= len(self.degrees) or self.degrees[pos] != m:
            raise KeyError(f"{m} is not in the active set")
        return int(self.cumulative[pos])

    def as_dict(self) -> dict[int, int]:
        return {int(m): int(c) for m, c in zip(self.degrees, self.cumulative)}


def band_index(d: int, k: int, M_max: int) -> BandIndex:
    _validate(d, k)
    degrees = [m for m in range(M_max + 1) if in_active_set(k, m)]
    total = 0
    cumulative = []
    for m in degrees:
        total += harmonic_dimension(d, m)
        cumulative.append(total)
    return BandIndex(d=d, k=k, degrees=np.array(degrees, dtype=int),
                     cumulative=np.array(cumulative, dtype=np.int64))


@dataclass
class OracleResult:
    value: float
    error_estimate: float
    panels: int = field(default=0)


# pi/2 to long-double accuracy
_HALF_PI = np.arctan(np.longdouble(1)) * 2


def _oracle_numerator(d: int, k: int, m: int, panels: int, nodes: int) -> float:
    # sigma_k vanishes on t < 0: integrate phi in [0, pi/2] only, in t = cos(phi)
    phi, w = gauss_legendre_panels(0.0, _HALF_PI, panels, nodes, extended=True)
    t = np.cos(phi)
    p = ladder_values(d, m, t)[m]
    return np.sum(p * t ** k * np.sin(phi) ** (d - 1) * w)


def coefficient_oracle(d: int, k: int, m: int, *, nodes_per_panel: int = 32,
                       tol: float = 1e-12, max_panels: int = 4096) -> OracleResult:
    """sigma_hat(m) by composite Gauss-Legendre quadrature, independent of closed forms.

    Panels double until successive numerators agree to ``tol`` (relative to
    the integrand scale N(m) * B(1/2, d/2)); raises if that never happens.
    """
    _validate(d, k, m)
    if m > 200:
        raise ValueError("oracle accuracy envelope is m <= 200")
    # denominator int p_m^2 w dt, also by quadrature over the whole interval
    phi, w = gauss_legendre_panels(0.0, 2 * _HALF_PI, 64, nodes_per_panel, extended=True)
    p = ladder_values(d, m, np.cos(phi))[m]
    den = np.sum(p * p * np.sin(phi) ** (d - 1) * w)
    scale = den
    panels = 4
    prev = _oracle_numerator(d, k, m, panels, nodes_per_panel)
    while panels < max_panels:
        panels *= 2
        cur = _oracle_numerator(d, k, m, panels, nodes_per_panel)
        err = abs(cur - prev)
        if err <= tol * scale:
            return OracleResult(value=float(cur / den), error_estimate=float(err / den),
                                panels=panels)
        prev = cur
    raise ArithmeticError(f"oracle quadrature did not converge for d={d}, k={k}, m={m}")


def default_mmax(n: int, d: int) -> int:
    return max(200, 10 * math.ceil(n ** (1.0 / d)))
