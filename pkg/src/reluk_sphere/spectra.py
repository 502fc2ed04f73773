"""Eigenvalues of Gram matrices and the power laws they follow.

For an antipodally quasi-uniform design with n points the mass matrix obeys
``kappa ~ n^alpha`` and ``lambda_j ~ n j^-alpha`` with
``alpha = (d + 2(k - s) + 1) / d``; the effective dimension and counting
function then scale like ``(n / lambda)^(1/alpha)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .coefficients import BandIndex, CoefficientTable, band_index, default_mmax
from .gram import GramMatrix, assemble_mass, assemble_stiffness
from .sphere_points import PointSet, mesh_statistics

__all__ = [
    "EigenSolverError",
    "SpectrumReport",
    "PowerLawFit",
    "EffectiveDimensionCurve",
    "theoretical_exponent",
    "eig_sym",
    "fit_power_law",
    "spectrum_law_fit",
    "default_j_range",
    "asymptotic_window",
    "condition_sweep",
    "SweepRecord",
    "SweepResult",
    "plateau_check",
    "PlateauRecord",
    "effective_dimension",
    "counting_function",
    "CountingCurve",
]

log = logging.getLogger(__name__)


class EigenSolverError(RuntimeError):
    pass


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray  # descending
    residual_norm: float
    n: int
    metadata: dict = field(default_factory=dict)
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def condition_number(self) -> float:
        lo = self.eigenvalues[-1]
        return math.inf if lo <= 0 else float(self.eigenvalues[0] / lo)

    @property
    def trace(self) -> float:
        return float(np.sum(self.eigenvalues))


@dataclass
class PowerLawFit:
    slope: float
    intercept: float
    r_squared: float
    fit_range: tuple[float, float]
    points: int

    def deviation(self, target: float) -> float:
        """Relative deviation |slope - target| / |target|."""
        return abs(self.slope - target) / abs(target)


def theoretical_exponent(d: int, k: int, s: int = 0) -> float:
    """(d + 2(k-s) + 1) / d; s = 0 gives the mass-matrix exponent."""
    return (d + 2 * (k - s) + 1) / d


def eig_sym(g: GramMatrix | np.ndarray, keep_vectors: bool = False) -> SpectrumReport:
    """Full symmetric eigendecomposition (LAPACK) with a residual check."""
    if isinstance(g, GramMatrix):
        A = g.entries
        meta = g.header()
    else:
        A = np.asarray(g, dtype=float)
        meta = {}
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if not np.array_equal(A, A.T):
        raise ValueError("matrix is not exactly symmetric")
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from None
    w = w[::-1].copy()
    V = V[:, ::-1].copy()
    scale = max(abs(w[0]), abs(w[-1]))
    if scale == 0.0:
        resid = 0.0
    else:
        resid = float(np.max(np.linalg.norm(A @ V - V * w, axis=0)) / scale)
    return SpectrumReport(eigenvalues=w, residual_norm=resid, n=A.shape[0], metadata=meta,
                          eigenvectors=V if keep_vectors else None)


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> PowerLawFit:
    """Least-squares line through (log x, log y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("need at least two strictly positive points")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(slope=float(slope), intercept=float(intercept),
                       r_squared=min(max(r2, 0.0), 1.0),
                       fit_range=(float(x.min()), float(x.max())), points=len(x))


def default_j_range(n: int) -> tuple[int, int]:
    return math.ceil(n ** 0.2), math.floor(n ** 0.8)


def spectrum_law_fit(r: SpectrumReport, j_range: tuple[int, int] | None = None) -> PowerLawFit:
    """Slope of log lambda_j against log j over an index window."""
    lo, hi = j_range or default_j_range(r.n)
    lo, hi = max(1, int(lo)), min(r.n, int(hi))
    if hi - lo + 1 < 5:
        raise ValueError(f"index window [{lo}, {hi}] has fewer than 5 eigenvalues")
    j = np.arange(lo, hi + 1)
    lam = r.eigenvalues[lo - 1:hi]
    if np.any(lam <= 0):
        raise ValueError("non-positive eigenvalues in the fit window")
    return fit_power_law(j, lam)


def asymptotic_window(r: SpectrumReport, d: int, k: int) -> tuple[float, float]:
    """Eigenvalue window where the power law is expected to hold.

    Upper end: the largest eigenvalue outside the harmonic bands of degree
    <= k+1 (index d_{k+1} + 1); below those degrees the coefficients have no
    power-law form. Lower end: ten times the smallest eigenvalue.
    """
    j_top = band_index(d, k, k + 1)[k + 1] + 1
    upper = float(r.eigenvalues[min(j_top, r.n) - 1])
    lower = 10.0 * float(r.eigenvalues[-1])
    if not lower < upper:
        raise ValueError("spectrum too short for an asymptotic window")
    return lower, upper


# --- effective dimension and counting function ------------------------------

@dataclass
class EffectiveDimensionCurve:
    lambdas: np.ndarray
    d_eff: np.ndarray
    window: tuple[float, float] | None = None
    fit: PowerLawFit | None = None
    target_slope: float | None = None


def _d_eff(eigs: np.ndarray, lam: np.ndarray) -> np.ndarray:
    e = np.clip(eigs, 0.0, None)
    return np.sum(e[None, :] / (e[None, :] + lam[:, None]), axis=1)


def effective_dimension(r: SpectrumReport, lambda_grid: Iterable[float],
                        window: tuple[float, float] | None = None,
                        target_slope: float | None = None, fit_points: int = 40) -> EffectiveDimensionCurve:
    """d_eff(lambda) = sum_j lambda_j / (lambda_j + lambda) on a grid.

    When ``window`` is given, log d_eff is also fitted against log(n/lambda)
    on ``fit_points`` log-spaced values inside it.
    """
    lam = np.asarray(list(lambda_grid), dtype=float)
    if np.any(lam <= 0):
        raise ValueError("regularization values must be positive")
    curve = EffectiveDimensionCurve(lambdas=lam, d_eff=_d_eff(r.eigenvalues, lam),
                                    window=window, target_slope=target_slope)
    if window is not None:
        grid = np.geomspace(window[0], window[1], fit_points)
        curve.fit = fit_power_law(r.n / grid, _d_eff(r.eigenvalues, grid))
    return curve


@dataclass
class CountingCurve:
    thresholds: np.ndarray
    counts: np.ndarray
    window: tuple[float, float] | None = None
    fit: PowerLawFit | None = None


def _counts(eigs: np.ndarray, t: np.ndarray) -> np.ndarray:
    asc = np.sort(eigs)
    return len(asc) - np.searchsorted(asc, t, side="left")


def counting_function(r: SpectrumReport, t_grid: Iterable[float],
                      window: tuple[float, float] | None = None, fit_points: int = 40) -> CountingCurve:
    """N(t) = #{j : lambda_j >= t}, with an optional log-log fit against n/t."""
    t = np.asarray(list(t_grid), dtype=float)
    if np.any(t <= 0):
        raise ValueError("thresholds must be positive")
    curve = CountingCurve(thresholds=t, counts=_counts(r.eigenvalues, t), window=window)
    if window is not None:
        grid = np.geomspace(window[0], window[1], fit_points)
        curve.fit = fit_power_law(r.n / grid, _counts(r.eigenvalues, grid))
    return curve


# --- plateau diagnostic -----------------------------------------------------

@dataclass
class PlateauRecord:
    m: int  # band degree
    d_m: int
    ratio_lower: float
    ratio_upper: float


def plateau_check(r: SpectrumReport, bands: BandIndex, xi: CoefficientTable,
                  degree_fraction: float = 0.5, n_scale: int | None = None) -> list[PlateauRecord]:
    """Band ratios lambda / (n * xi(m)) at both ends of each harmonic band.

    For each active degree m >= 1 with predecessor m' in E (the band spans
    indices d_{m'} + 1 .. d_m), d_m <= n and m <= degree_fraction * n^{1/d},
    report lambda_{d_m} / (n xi(m)) and lambda_{d_{m'}+1} / (n xi(m)). For a
    weighted matrix pass ``n_scale=1``.
    """
    n = r.n
    scale = n if n_scale is None else n_scale
    limit = degree_fraction * n ** (1.0 / bands.d)
    degrees = list(bands.degrees)
    records = []
    for pos, m in enumerate(degrees):
        if pos == 0 or m > xi.M_max:
            continue
        d_top = int(bands.cumulative[pos])
        d_prev = int(bands.cumulative[pos - 1])
        if d_top > n or m > limit:
            continue
        ref = scale * xi.values[m]
        records.append(PlateauRecord(m=int(m), d_m=d_top,
                                     ratio_lower=float(r.eigenvalues[d_top - 1] / ref),
                                     ratio_upper=float(r.eigenvalues[d_prev] / ref)))
    return records


# --- sweeps -----------------------------------------------------------------

@dataclass
class SweepRecord:
    n: int
    seed: int
    h: float
    h_lower: float
    kappa: float
    lambda_max: float
    lambda_min: float
    singular: bool = False
    error: str | None = None


@dataclass
class SweepResult:
    records: list[SweepRecord]
    theoretical: float
    fit: PowerLawFit | None

    @property
    def deviation(self) -> float:
        return math.inf if self.fit is None else self.fit.deviation(self.theoretical)

    def medians(self) -> dict[int, float]:
        out = {}
        for n in sorted({r.n for r in self.records}):
            vals = [r.kappa for r in self.records if r.n == n and not r.singular and r.error is None]
            if vals:
                out[n] = float(np.median(vals))
        return out


def condition_sweep(d: int, k: int, s: int, sizes: Sequence[int],
                    generator: Callable[[int, int], PointSet], seeds: Sequence[int] = (0,),
                    kind: str = "mass", M_max: int | None = None,
                    grid_resolution: int = 64) -> SweepResult:
    """kappa(n) over sizes and seeds; fits log median kappa against log n.

    ``generator(n, seed)`` returns a point set. Matrices that are singular in
    double precision (lambda_min <= 0) are flagged and left out of the fit.
    """
    sizes = list(sizes)
    if len(sizes) < 4 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be increasing with at least 4 values")
    records = []
    for n in sizes:
        mmax = M_max or default_mmax(n, d)
        for seed in seeds:
            ps = generator(n, seed)
            stats = mesh_statistics(ps, grid_resolution)
            try:
                if kind == "mass":
                    g = assemble_mass(ps, k, mmax)
                else:
                    g = assemble_stiffness(ps, k, s, mmax)
                rep = eig_sym(g)
            except (ValueError, EigenSolverError) as exc:
                records.append(SweepRecord(n, seed, stats.fill_distance, stats.antipodal_separation,
                                           math.nan, math.nan, math.nan, error=str(exc)))
                log.warning("n=%d seed=%d failed: %s", n, seed, exc)
                continue
            lo, hi = rep.eigenvalues[-1], rep.eigenvalues[0]
            singular = not lo > 0 or not math.isfinite(hi / lo)
            if singular:
                log.warning("n=%d seed=%d: singular matrix excluded from fit", n, seed)
            records.append(SweepRecord(n, seed, stats.fill_distance, stats.antipodal_separation,
                                       rep.condition_number, float(hi), float(lo), singular=singular))
    alpha = theoretical_exponent(d, k, s if kind != "mass" else 0)
    result = SweepResult(records=records, theoretical=alpha, fit=None)
    med = result.medians()
    if len(med) >= 2:
        result.fit = fit_power_law(list(med), list(med.values()))
    return result
