"""Mass and stiffness Gram matrices of ReLU^k features on S^d.

Entries are zonal series ``sum_{m in E} c(m) p_m(theta_i . theta_j)`` summed
with a fused three-term recurrence; a Monte Carlo integrator gives an
independent check.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import betaln, gammaln

from .coefficients import CoefficientTable, falling_factorial, xi_s_table, xi_table
from .gegenbauer import recurrence_a, recurrence_b
from .sphere_points import PointSet

__all__ = [
    "GramMatrix",
    "zonal_series",
    "tail_bound",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_qmc",
    "weighted",
    "mass_diagonal",
    "save_matrix",
    "load_matrix",
]

_MAGIC = b"RKGRAM01"


@dataclass
class GramMatrix:
    kind: str  # "mass" or "stiffness"
    d: int
    k: int
    s: int
    entries: np.ndarray
    M_max: int | None = None
    tail_bound: float = 0.0
    weighting: str = "unweighted"  # or "uniform_tau"
    standard_error: np.ndarray | None = None  # Monte Carlo assembly only

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def header(self) -> dict:
        return {"kind": self.kind, "d": self.d, "k": self.k, "s": self.s, "n": self.n,
                "M_max": self.M_max, "tail_bound": self.tail_bound, "weighting": self.weighting}


def zonal_series(d: int, coeffs: np.ndarray, t: np.ndarray) -> np.ndarray:
    """sum_m coeffs[m] p_m(t), elementwise over t.

    The ladder p_{m-1}, p_m is advanced in place and the products are added
    with Kahan compensation, so memory stays O(len(t)).
    """
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    M = len(coeffs) - 1
    total = np.full(t.shape, float(coeffs[0]))
    comp = np.zeros(t.shape)
    if M == 0:
        return total
    p_prev = np.ones(t.shape)
    p_cur = (d + 1) * t

    def add(c, p):
        nonlocal total, comp
        y = c * p - comp
        s = total + y
        comp = (s - total) - y
        total = s

    if coeffs[1] != 0.0:
        add(coeffs[1], p_cur)
    for m in range(1, M):
        p_next = (t * p_cur - recurrence_b(d, m) * p_prev) / recurrence_a(d, m)
        p_prev, p_cur = p_cur, p_next
        c = coeffs[m + 1]
        if c != 0.0:
            add(c, p_cur)
    return total


def _log_harmonic_dimension(d: int, m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if d == 1:
        return np.full(m.shape, math.log(2.0))
    return (np.log(2 * m + d - 1) - np.log(m) + gammaln(m + d - 1) - gammaln(d) - gammaln(m))


def tail_bound(table: CoefficientTable, horizon: int = 64) -> float:
    """A-priori bound on sum_{m in E, m > M_max} c(m) N(m).

    The envelope C m^{-alpha} (alpha the decay exponent) is calibrated on
    active m in [M_max/2, M_max]: c(m) m^alpha still creeps up there, so its
    limit is extrapolated by a quadratic fit in 1/m, and C is 1.1 times the
    larger of that limit and the window maximum. Terms are summed up to
    ``horizon * M_max`` and the rest bounded by an integral.
    """
    M = table.M_max
    alpha = table.decay_exponent
    window = [m for m in table.active_indices() if m >= max(M // 2, table.k + 1)]
    if not window:
        return math.inf
    window = np.array(window, dtype=float)
    scaled = table.values[window.astype(int)] * window ** alpha
    C = float(np.max(scaled))
    if len(window) >= 4:
        basis = np.vstack([np.ones_like(window), 1 / window, 1 / window ** 2]).T
        C = max(C, float(np.linalg.lstsq(basis, scaled, rcond=None)[0][0]))
    C *= 1.1
    start = M + 1 if (M + 1 - table.k - 1) % 2 == 0 else M + 2
    L = horizon * max(M, 1)
    m = np.arange(start, L + 1, 2, dtype=float)
    terms = C * np.exp(-alpha * np.log(m) + _log_harmonic_dimension(table.d, m))
    total = math.fsum(terms)
    # remainder: terms decay like m^{-(alpha-d+1)}, every other index
    last = C * math.exp(-alpha * math.log(L) + float(_log_harmonic_dimension(table.d, np.array(L))))
    p = alpha - table.d + 1
    total += 0.5 * last * L / (p - 1) if p > 1 else math.inf
    return total


def _assemble(ps: PointSet, table: CoefficientTable, kind: str) -> GramMatrix:
    X = ps.points
    n = ps.n
    iu = np.triu_indices(n)
    t = np.einsum("ij,ij->i", X[iu[0]], X[iu[1]])
    vals = zonal_series(ps.d, table.values, t)
    A = np.empty((n, n))
    A[iu] = vals
    A[(iu[1], iu[0])] = vals
    return GramMatrix(kind=kind, d=ps.d, k=table.k, s=table.s, entries=A, M_max=table.M_max,
                      tail_bound=tail_bound(table))


def assemble_mass(ps: PointSet, k: int, M_max: int) -> GramMatrix:
    if M_max < k + 1:
        raise ValueError(f"M_max must be at least k+1 = {k + 1}")
    return _assemble(ps, xi_table(ps.d, k, M_max), "mass")


def assemble_stiffness(ps: PointSet, k: int, s: int, M_max: int) -> GramMatrix:
    if s > k:
        raise ValueError(f"stiffness order s={s} exceeds activation order k={k}")
    if M_max < k + 1:
        raise ValueError(f"M_max must be at least k+1 = {k + 1}")
    if s == 0:
        g = assemble_mass(ps, k, M_max)
        return replace(g, kind="stiffness")
    return _assemble(ps, xi_s_table(ps.d, k, s, M_max), "stiffness")


def mass_diagonal(d: int, k: int) -> float:
    """int sigma_k(theta . w)^2 dw = B(k + 1/2, d/2) / (2 B(1/2, d/2))."""
    return 0.5 * math.exp(betaln(k + 0.5, 0.5 * d) - betaln(0.5, 0.5 * d))


def assemble_qmc(ps: PointSet, k: int, s: int = 0, n_samples: int = 10**6, seed: int = 0,
                 batches: int = 16) -> GramMatrix:
    """Monte Carlo Gram matrix with per-entry standard errors.

    Directions are i.i.d. normalized Gaussians split into ``batches`` equal
    batches with seeds spawned from ``seed``; the standard error is the
    standard deviation of the batch means over sqrt(batches). For s >= 1 the
    order-(k-s) mass estimate is scaled by (k)_s^2 (theta_i . theta_j)^s.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    if not 0 <= s <= k:
        raise ValueError(f"need 0 <= s <= k, got s={s}, k={k}")
    X = ps.points
    order = k - s
    per_batch = n_samples // batches
    children = np.random.SeedSequence(seed).spawn(batches)
    means = np.empty((batches, ps.n, ps.n))
    chunk = 1 << 16
    for b, child in enumerate(children):
        rng = np.random.default_rng(child)
        acc = np.zeros((ps.n, ps.n))
        done = 0
        while done < per_batch:
            size = min(chunk, per_batch - done)
            W = rng.standard_normal((size, ps.d + 1))
            W /= np.linalg.norm(W, axis=1, keepdims=True)
            proj = W @ X.T
            F = (proj > 0).astype(float) if order == 0 else np.maximum(proj, 0.0) ** order
            acc += F.T @ F
            done += size
        means[b] = acc / per_batch
    est = means.mean(axis=0)
    se = means.std(axis=0, ddof=1) / math.sqrt(batches)
    if s:
        scale = falling_factorial(k, s) ** 2 * np.clip(X @ X.T, -1.0, 1.0) ** s
        est = est * scale
        se = se * np.abs(scale)
    est = 0.5 * (est + est.T)
    se = 0.5 * (se + se.T)
    return GramMatrix(kind="mass" if s == 0 else "stiffness", d=ps.d, k=k, s=s, entries=est,
                      M_max=None, tail_bound=0.0, standard_error=se)


def weighted(g: GramMatrix) -> GramMatrix:
    """Equal quadrature weights tau_j = 1/n: W^{1/2} G W^{1/2} = G / n."""
    if g.weighting != "unweighted":
        raise ValueError("matrix is already weighted")
    se = None if g.standard_error is None else g.standard_error / g.n
    return replace(g, entries=g.entries / g.n, weighting="uniform_tau",
                   tail_bound=g.tail_bound / g.n, standard_error=se)


def save_matrix(g: GramMatrix, path, fmt: str | None = None) -> Path:
    """CSV (dense rows) or binary: magic, JSON header length + header, row-major float64."""
    path = Path(path)
    fmt = fmt or ("bin" if path.suffix in (".bin", ".gram") else "csv")
    if fmt == "csv":
        np.savetxt(path, g.entries, delimiter=",", fmt="%.17e")
    else:
        head = json.dumps(g.header()).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", len(head)))
            fh.write(head)
            fh.write(np.ascontiguousarray(g.entries, dtype="<f8").tobytes())
    return path


def load_matrix(path) -> GramMatrix:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a binary Gram file")
        (size,) = struct.unpack("<I", fh.read(4))
        head = json.loads(fh.read(size))
        data = np.frombuffer(fh.read(), dtype="<f8")
    n = head["n"]
    entries = data.reshape(n, n).copy()
    return GramMatrix(kind=head["kind"], d=head["d"], k=head["k"], s=head["s"], entries=entries,
                      M_max=head["M_max"], tail_bound=head["tail_bound"], weighting=head["weighting"])
