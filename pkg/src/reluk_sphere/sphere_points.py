"""Point sets on S^d: random sampling, Riesz energy descent, mesh statistics, file I/O."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "PointSet",
    "MeshStatistics",
    "RieszResult",
    "sample_uniform",
    "riesz_energy",
    "riesz_minimize",
    "geodesic_distance",
    "antipodal_separation",
    "fill_distance",
    "sphere_grid",
    "mesh_statistics",
    "save_points",
    "load_points",
]

log = logging.getLogger(__name__)

NORM_TOL = 1e-12
MESH_RATIO_FLAG = 10.0


@dataclass
class PointSet:
    """n unit vectors in R^{d+1} with a record of how they were produced."""

    d: int
    points: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if self.points.ndim != 2 or self.points.shape[1] != self.d + 1 or len(self.points) < 1:
            raise ValueError(f"points must have shape (n >= 1, {self.d + 1})")
        norms = np.linalg.norm(self.points, axis=1)
        if np.max(np.abs(norms - 1.0)) > NORM_TOL:
            raise ValueError("all points must have unit norm")

    @property
    def n(self) -> int:
        return len(self.points)


@dataclass
class MeshStatistics:
    fill_distance: float
    antipodal_separation: float
    mesh_ratio: float
    grid_spacing: float
    grid_size: int
    h_lower_defined: bool = True

    @property
    def flagged(self) -> bool:
        """True when the set is far from antipodally quasi-uniform."""
        return not self.h_lower_defined or self.mesh_ratio > MESH_RATIO_FLAG

    def as_dict(self) -> dict:
        return {
            "h": self.fill_distance,
            "h_lower": self.antipodal_separation,
            "mesh_ratio": self.mesh_ratio,
            "grid_spacing": self.grid_spacing,
            "grid_size": self.grid_size,
            "h_lower_defined": self.h_lower_defined,
            "flagged": self.flagged,
        }


def _check_dn(d: int, n: int) -> None:
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")


def _normalize(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def sample_uniform(d: int, n: int, seed: int) -> PointSet:
    """n i.i.d. surface-uniform points (normalized Gaussian draws)."""
    _check_dn(d, n)
    rng = np.random.default_rng(seed)
    x = _normalize(rng.standard_normal((n, d + 1)))
    return PointSet(d=d, points=x, provenance={"method": "random", "seed": int(seed)})


# --- Riesz energy -----------------------------------------------------------

def _pair_terms(X: np.ndarray, s: float, sign: float):
    """Energy and gradient of sum_{i != j} |x_i - sign*x_j|^{-s}."""
    G = X @ X.T
    r2 = np.maximum(2.0 - 2.0 * sign * G, 0.0)
    np.fill_diagonal(r2, 1.0)
    with np.errstate(divide="ignore"):
        inv = r2 ** (-0.5 * s)
    np.fill_diagonal(inv, 0.0)
    energy = inv.sum()
    coef = inv / r2
    # d/dx_i of both ordered pairs: -2s * sum_j coef_ij (x_i - sign*x_j)
    grad = -2.0 * s * (coef.sum(axis=1)[:, None] * X - sign * (coef @ X))
    return energy, grad


def riesz_energy(X: np.ndarray, s: float, antipodal_weight: float = 0.0) -> float:
    e, _ = _pair_terms(np.asarray(X, dtype=float), s, 1.0)
    if antipodal_weight:
        ea, _ = _pair_terms(np.asarray(X, dtype=float), s, -1.0)
        e += antipodal_weight * ea
    return float(e)


def _energy_grad(X, s, antipodal_weight):
    e, g = _pair_terms(X, s, 1.0)
    if antipodal_weight:
        ea, ga = _pair_terms(X, s, -1.0)
        e = e + antipodal_weight * ea
        g = g + antipodal_weight * ga
    return e, g


@dataclass
class RieszResult:
    points: PointSet
    energies: list[float]
    converged: bool
    iterations: int

    @property
    def initial_energy(self) -> float:
        return self.energies[0]

    @property
    def final_energy(self) -> float:
        return self.energies[-1]


def riesz_minimize(d: int, n: int, seed: int, max_iters: int = 2000, step_tol: float = 1e-9,
                   s: float | None = None, antipodal_weight: float = 1.0,
                   initial: np.ndarray | None = None) -> RieszResult:
    """Projected gradient descent on the Riesz s-energy (s = d by default).

    Starts from ``sample_uniform(d, n, seed)``. Each step moves along the
    negative tangential gradient and renormalizes; the step is halved until
    the energy decreases and grown by 1.5x after every accepted step. The
    loop stops once the largest point displacement of an accepted step is
    below ``step_tol``.

    ``antipodal_weight`` adds ``w * sum_{i != j} |x_i + x_j|^{-s}``, which
    repels each point from the antipodes of the others. With w = 0 the plain
    Riesz energy is minimized; its minimizers often contain exact antipodal
    pairs, collapsing the antipodal separation to zero.
    """
    _check_dn(d, n)
    if n < 2:
        raise ValueError("Riesz minimization needs n >= 2")
    s = float(d) if s is None else float(s)
    X = (_normalize(np.array(initial, dtype=float)) if initial is not None
         else sample_uniform(d, n, seed).points)
    E, G = _energy_grad(X, s, antipodal_weight)
    energies = [float(E)]
    step = 0.1 / n
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        T = G - np.sum(G * X, axis=1, keepdims=True) * X
        accepted = False
        while step > 1e-300:
            Y = _normalize(X - step * T)
            E_new, G_new = _energy_grad(Y, s, antipodal_weight)
            if E_new < E:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True  # no descent direction left at machine precision
            break
        move = float(np.max(np.linalg.norm(Y - X, axis=1)))
        X, E, G = Y, E_new, G_new
        energies.append(float(E))
        if move < step_tol:
            converged = True
            break
        step *= 1.5
    if not converged:
        log.info("riesz_minimize: max_iters=%d reached (n=%d, d=%d, seed=%d)", max_iters, n, d, seed)
    ps = PointSet(d=d, points=X, provenance={
        "method": "riesz", "seed": int(seed), "iterations": it, "s": s,
        "antipodal_weight": float(antipodal_weight), "converged": converged,
    })
    return RieszResult(points=ps, energies=energies, converged=converged, iterations=it)


# --- distances and mesh statistics -----------------------------------------

def geodesic_distance(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-9 or abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("geodesic_distance needs unit vectors")
    return float(np.arccos(np.clip(np.dot(u, v), -1.0, 1.0)))


def antipodal_separation(X: np.ndarray) -> float:
    """min over i != j of min(rho(x_i, x_j), rho(-x_i, x_j)); NaN when n < 2."""
    X = np.asarray(X, dtype=float)
    if len(X) < 2:
        return math.nan
    G = np.abs(X @ X.T)
    np.fill_diagonal(G, -np.inf)
    return float(np.arccos(min(np.max(G), 1.0)))


def sphere_grid(d: int, resolution: int) -> tuple[np.ndarray, float]:
    """Deterministic product grid in hyperspherical angles.

    The polar angles take ``resolution`` cell-centred values in (0, pi) and
    the azimuth ``2*resolution`` values in [0, 2pi); returns the grid and
    its angular spacing pi/resolution.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    polar = (np.arange(resolution) + 0.5) * math.pi / resolution
    azim = np.arange(2 * resolution) * math.pi / resolution
    axes = [polar] * (d - 1) + [azim]
    mesh = np.meshgrid(*axes, indexing="ij")
    angles = [a.ravel() for a in mesh]
    m = angles[0].size
    pts = np.empty((m, d + 1))
    sin_prod = np.ones(m)
    for i, ang in enumerate(angles[:-1]):
        pts[:, i] = sin_prod * np.cos(ang)
        sin_prod = sin_prod * np.sin(ang)
    pts[:, d - 1] = sin_prod * np.cos(angles[-1])
    pts[:, d] = sin_prod * np.sin(angles[-1])
    return pts, math.pi / resolution


def fill_distance(X: np.ndarray, grid: np.ndarray, chunk: int = 4096) -> float:
    """max over grid points of the distance to the nearest point of X."""
    best = np.inf
    for start in range(0, len(grid), chunk):
        block = grid[start:start + chunk] @ X.T
        best = min(best, float(np.min(np.max(block, axis=1))))
    return float(np.arccos(np.clip(best, -1.0, 1.0)))


def mesh_statistics(ps: PointSet, grid_resolution: int = 64) -> MeshStatistics:
    """Fill distance on a grid (a lower estimate) and the exact antipodal separation."""
    if grid_resolution < 10:
        raise ValueError("grid_resolution must be >= 10")
    grid, spacing = sphere_grid(ps.d, grid_resolution)
    h = fill_distance(ps.points, grid)
    h_lower = antipodal_separation(ps.points)
    defined = not math.isnan(h_lower)
    if not defined:
        ratio = math.nan
    elif h_lower == 0.0:
        ratio = math.inf
    else:
        ratio = h / h_lower
    return MeshStatistics(fill_distance=h, antipodal_separation=h_lower, mesh_ratio=ratio,
                          grid_spacing=spacing, grid_size=len(grid), h_lower_defined=defined)


# --- file formats ------------------------------------------------------------

def save_points(ps: PointSet, path, fmt: str | None = None) -> Path:
    """Write text (``d=<d> n=<n>`` header, 17 significant digits) or JSON."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "txt")
    if fmt == "json":
        payload = {"d": ps.d, "n": ps.n, "points": ps.points.tolist(), "provenance": ps.provenance}
        path.write_text(json.dumps(payload, indent=1) + "\n")
    else:
        lines = [f"d={ps.d} n={ps.n}"]
        lines += [" ".join(f"{v:.17e}" for v in row) for row in ps.points]
        path.write_text("\n".join(lines) + "\n")
    return path


def load_points(path) -> PointSet:
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        payload = json.loads(text)
        pts = np.array(payload["points"], dtype=float)
        if len(pts) != payload["n"]:
            raise ValueError(f"{path}: header says n={payload['n']} but found {len(pts)} points")
        prov = dict(payload.get("provenance") or {})
        prov.setdefault("source", str(path))
        return PointSet(d=int(payload["d"]), points=pts, provenance=prov)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = dict(tok.split("=", 1) for tok in lines[0].split())
    d, n = int(header["d"]), int(header["n"])
    pts = np.array([[float(v) for v in ln.split()] for ln in lines[1:]], dtype=float)
    if pts.shape != (n, d + 1):
        raise ValueError(f"{path}: expected {n} rows of {d + 1} values, got {pts.shape}")
    return PointSet(d=d, points=pts, provenance={"method": "file", "path": str(path)})
