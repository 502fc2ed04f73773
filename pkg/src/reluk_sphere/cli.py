"""Command-line entry point: ``reluk-sphere <subcommand> ...``.

Exit codes: 0 success, 1 usage or I/O error, 2 a fitted exponent misses its
threshold, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import (
    band_index,
    coefficient_oracle,
    default_mmax,
    xi_s_table,
    xi_table,
)
from .gram import assemble_mass, assemble_qmc, assemble_stiffness, save_matrix, weighted
from .spectra import (
    EigenSolverError,
    asymptotic_window,
    condition_sweep,
    effective_dimension,
    eig_sym,
    fit_power_law,
    plateau_check,
    spectrum_law_fit,
    theoretical_exponent,
)
from .sphere_points import (
    PointSet,
    load_points,
    mesh_statistics,
    riesz_minimize,
    sample_uniform,
    save_points,
)

log = logging.getLogger("reluk_sphere")

OUT_ENV = "RELUK_SPHERE_OUT"
EXIT_OK, EXIT_USAGE, EXIT_THRESHOLD, EXIT_NUMERIC = 0, 1, 2, 3
SLOPE_TOLERANCE = 0.15


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    d: int = 2
    k: int = 1
    s: int = 0
    n: int | None = None
    sizes: list[int] = field(default_factory=lambda: [50, 100, 200, 400])
    generator: str = "riesz"
    seeds: list[int] = field(default_factory=lambda: [0])
    points: str | None = None
    mmax: int | None = None
    qmc_samples: int | None = None
    riesz_iters: int = 1000
    antipodal_weight: float = 1.0
    grid_resolution: int = 64
    kind: str = "mass"
    out: str = "."
    format: str = "csv"
    threads: int = 1

    def validate(self) -> None:
        if self.d < 1 or self.k < 0:
            raise UsageError("need d >= 1 and k >= 0")
        if not 0 <= self.s <= self.k:
            raise UsageError(f"need 0 <= s <= k (got s={self.s}, k={self.k})")
        if not self.sizes or any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise UsageError("sizes must be nonempty and increasing")
        if self.generator not in ("riesz", "random", "file"):
            raise UsageError(f"unknown generator {self.generator!r}")
        if self.format not in ("csv", "json"):
            raise UsageError(f"unknown format {self.format!r}")


# --- helpers ----------------------------------------------------------------

def make_points(cfg: ExperimentConfig, n: int, seed: int) -> PointSet:
    if cfg.generator == "random":
        return sample_uniform(cfg.d, n, seed)
    if cfg.generator == "riesz":
        return riesz_minimize(cfg.d, n, seed, max_iters=cfg.riesz_iters,
                              antipodal_weight=cfg.antipodal_weight).points
    if not cfg.points:
        raise UsageError("generator 'file' needs --points")
    return load_points(cfg.points)


def _points_for(cfg: ExperimentConfig) -> PointSet:
    if cfg.points:
        ps = load_points(cfg.points)
        cfg.d = ps.d
        return ps
    if cfg.n is None:
        raise UsageError("give --points or --n")
    return make_points(cfg, cfg.n, cfg.seeds[0])


def _out_dir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    return str(v)


def write_table(path: Path, header: list[str], rows: list[list], fmt: str = "csv") -> Path:
    """Write rows as CSV; with fmt='json' also write the JSON mirror."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    if fmt == "json":
        records = [{h: (v.item() if isinstance(v, np.generic) else v) for h, v in zip(header, row)}
                   for row in rows]
        path.with_suffix(".json").write_text(json.dumps(records, indent=1, allow_nan=True) + "\n")
    return path


def _summary(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True, default=float) + "\n")


# --- subcommands ------------------------------------------------------------

def cmd_gen_points(cfg: ExperimentConfig, args) -> int:
    out = _out_dir(cfg)
    sizes = [cfg.n] if cfg.n is not None else cfg.sizes
    suffix = "json" if cfg.format == "json" else "txt"
    for n in sizes:
        for seed in cfg.seeds:
            ps = make_points(cfg, n, seed)
            stem = f"points_{cfg.generator}_d{cfg.d}_n{n}_seed{seed}"
            save_points(ps, out / f"{stem}.{suffix}", fmt=suffix)
            stats = mesh_statistics(ps, cfg.grid_resolution)
            side = {"d": cfg.d, "n": n, "seed": seed, "provenance": ps.provenance, **stats.as_dict()}
            _summary(out / f"{stem}.mesh.json", side)
            print(f"{stem}: h={stats.fill_distance:.6g} h_lower={stats.antipodal_separation:.6g} "
                  f"mesh_ratio={stats.mesh_ratio:.6g}")
    return EXIT_OK


def cmd_mesh_stats(cfg: ExperimentConfig, args) -> int:
    ps = _points_for(cfg)
    stats = mesh_statistics(ps, cfg.grid_resolution)
    print(json.dumps({"d": ps.d, "n": ps.n, **stats.as_dict()}, indent=1, default=float))
    return EXIT_OK


def cmd_coeff_table(cfg: ExperimentConfig, args) -> int:
    mmax = cfg.mmax or 50
    mass = xi_table(cfg.d, cfg.k, mmax)
    stiff = xi_s_table(cfg.d, cfg.k, cfg.s, mmax) if cfg.s > 0 else None
    header = ["m", "in_E", "xi"] + (["xi_s"] if stiff else []) + ["oracle", "rel_err"]
    rows = []
    for m in range(mmax + 1):
        row = [m, bool(mass.active_mask[m]), mass.values[m]]
        if stiff:
            row.append(stiff.values[m])
        if m <= 200:
            o = coefficient_oracle(cfg.d, cfg.k, m).value ** 2
            rel = abs(mass.values[m] - o) / o if mass.active_mask[m] else abs(o)
        else:
            o, rel = math.nan, math.nan
        rows += [row + [o, rel]]
    path = write_table(_out_dir(cfg) / "coeff_table.csv", header, rows, cfg.format)
    print(f"wrote {path}")
    return EXIT_OK


def _assemble(cfg: ExperimentConfig, ps: PointSet):
    mmax = cfg.mmax or default_mmax(ps.n, ps.d)
    if cfg.kind == "mass":
        return assemble_mass(ps, cfg.k, mmax)
    return assemble_stiffness(ps, cfg.k, cfg.s, mmax)


def cmd_assemble(cfg: ExperimentConfig, args) -> int:
    ps = _points_for(cfg)
    if cfg.qmc_samples:
        g = assemble_qmc(ps, cfg.k, cfg.s if cfg.kind != "mass" else 0, cfg.qmc_samples,
                         seed=cfg.seeds[0])
    else:
        g = _assemble(cfg, ps)
    if args.weighted:
        g = weighted(g)
    target = Path(args.matrix_out) if args.matrix_out else _out_dir(cfg) / "gram.csv"
    save_matrix(g, target)
    _summary(target.with_suffix(".meta.json"), g.header())
    print(f"wrote {target} ({g.n}x{g.n}, tail_bound={g.tail_bound:.3g})")
    return EXIT_OK


def _spectrum(cfg: ExperimentConfig):
    ps = _points_for(cfg)
    g = _assemble(cfg, ps)
    return ps, g, eig_sym(g)


def cmd_spectrum(cfg: ExperimentConfig, args) -> int:
    ps, g, rep = _spectrum(cfg)
    rows = [[j + 1, lam] for j, lam in enumerate(rep.eigenvalues)]
    write_table(_out_dir(cfg) / "spectrum.csv", ["j", "lambda_j"], rows, cfg.format)
    fit = spectrum_law_fit(rep)
    s = cfg.s if cfg.kind != "mass" else 0
    alpha = theoretical_exponent(ps.d, cfg.k, s)
    print(f"n={rep.n} kappa={rep.condition_number:.6g} residual={rep.residual_norm:.2e}")
    print(f"spectrum slope={fit.slope:.4f} theoretical={-alpha:.4f} "
          f"deviation={fit.deviation(-alpha):.3f}")
    return EXIT_OK


def cmd_deff(cfg: ExperimentConfig, args) -> int:
    ps, g, rep = _spectrum(cfg)
    lam = np.geomspace(rep.eigenvalues[-1] * 1e-2, rep.eigenvalues[0] * 1e2, args.grid)
    window = asymptotic_window(rep, ps.d, cfg.k)
    s = cfg.s if cfg.kind != "mass" else 0
    curve = effective_dimension(rep, lam, window=window,
                                target_slope=1.0 / theoretical_exponent(ps.d, cfg.k, s))
    rows = [[l, v] for l, v in zip(curve.lambdas, curve.d_eff)]
    write_table(_out_dir(cfg) / "deff.csv", ["lambda", "d_eff"], rows, cfg.format)
    print(f"d_eff slope={curve.fit.slope:.4f} theoretical={curve.target_slope:.4f} "
          f"window=[{window[0]:.3g}, {window[1]:.3g}]")
    return EXIT_OK


def cmd_bands(cfg: ExperimentConfig, args) -> int:
    ps, g, rep = _spectrum(cfg)
    mmax = g.M_max
    table = xi_table(ps.d, cfg.k, mmax) if cfg.kind == "mass" else xi_s_table(ps.d, cfg.k, cfg.s, mmax)
    recs = plateau_check(rep, band_index(ps.d, cfg.k, mmax), table)
    rows = [[r.m, r.d_m, r.ratio_lower, r.ratio_upper] for r in recs]
    write_table(_out_dir(cfg) / "bands.csv", ["m", "d_m", "ratio_lower", "ratio_upper"], rows,
                cfg.format)
    for r in recs:
        print(f"band m={r.m}: d_m={r.d_m} ratio_lower={r.ratio_lower:.4f} "
              f"ratio_upper={r.ratio_upper:.4f}")
    return EXIT_OK


def cmd_scaling(cfg: ExperimentConfig, args) -> int:
    if len(cfg.sizes) < 4:
        raise UsageError("scaling needs at least 4 sizes")
    res = condition_sweep(cfg.d, cfg.k, cfg.s, cfg.sizes, lambda n, seed: make_points(cfg, n, seed),
                          seeds=cfg.seeds, kind=cfg.kind, M_max=cfg.mmax,
                          grid_resolution=cfg.grid_resolution)
    rows = []
    seen: dict[int, float] = {}
    for rec in sorted(res.records, key=lambda r: (r.n, r.seed)):
        slope = math.nan
        if not rec.singular and rec.error is None:
            seen.setdefault(rec.n, rec.kappa)
            if len(seen) >= 2:
                slope = fit_power_law(list(seen), list(seen.values())).slope
        rows.append([rec.n, rec.seed, rec.h, rec.h_lower, rec.kappa, slope])
    write_table(_out_dir(cfg) / "scaling.csv", ["n", "seed", "h", "h_lower", "kappa", "slope_so_far"],
                rows, cfg.format)
    if res.fit is None:
        print("not enough usable sizes for a fit")
        return EXIT_NUMERIC
    dev = res.deviation
    print(f"theoretical exponent={res.theoretical:.4f} fitted slope={res.fit.slope:.4f} "
          f"relative deviation={dev:.3f}")
    _summary(_out_dir(cfg) / "scaling_summary.json",
             {"theoretical": res.theoretical, "slope": res.fit.slope, "deviation": dev,
              "r_squared": res.fit.r_squared, "medians": res.medians()})
    return EXIT_OK if dev <= SLOPE_TOLERANCE else EXIT_THRESHOLD


def compare_sampling(cfg: ExperimentConfig) -> dict:
    """Per-n medians of h, h_lower and kappa for random and Riesz designs."""
    arms = {}
    for gen in ("random", "riesz"):
        arm_cfg = ExperimentConfig(**{**asdict(cfg), "generator": gen})
        res = condition_sweep(cfg.d, cfg.k, 0, cfg.sizes,
                              lambda n, seed: make_points(arm_cfg, n, seed), seeds=cfg.seeds,
                              kind="mass", M_max=cfg.mmax, grid_resolution=cfg.grid_resolution)
        per_n = {}
        for n in cfg.sizes:
            recs = [r for r in res.records if r.n == n]
            kappas = [r.kappa if not r.singular and r.error is None else math.inf for r in recs]
            per_n[n] = {
                "h": float(np.median([r.h for r in recs])),
                "h_lower": float(np.median([r.h_lower for r in recs])),
                "kappa": float(np.median(kappas)),
            }
        fit = fit_power_law(cfg.sizes, [per_n[n]["h_lower"] for n in cfg.sizes])
        fit_h = fit_power_law(cfg.sizes, [per_n[n]["h"] for n in cfg.sizes])
        arms[gen] = {"per_n": per_n, "h_lower_slope": fit.slope, "h_slope": fit_h.slope}
    return arms


def cmd_compare_sampling(cfg: ExperimentConfig, args) -> int:
    if len(cfg.seeds) < 10:
        raise UsageError("compare-sampling needs at least 10 seeds")
    arms = compare_sampling(cfg)
    rows = []
    for n in cfg.sizes:
        for gen in ("random", "riesz"):
            p = arms[gen]["per_n"][n]
            rows.append([gen, n, p["h"], p["h_lower"], p["kappa"]])
    write_table(_out_dir(cfg) / "compare.csv", ["generator", "n", "median_h", "median_h_lower",
                                                "median_kappa"], rows, cfg.format)
    d = cfg.d
    ok = True
    for gen, target, tol in (("random", -2.0 / d, 0.3), ("riesz", -1.0 / d, 0.15)):
        slope = arms[gen]["h_lower_slope"]
        print(f"{gen}: h_lower slope={slope:.4f} reference={target:.4f}")
        ok &= abs(slope - target) <= tol
    gap = all(arms["random"]["per_n"][n]["kappa"] >= arms["riesz"]["per_n"][n]["kappa"]
              for n in cfg.sizes)
    print(f"median kappa random >= riesz at every n: {gap}")
    _summary(_out_dir(cfg) / "compare_summary.json", arms)
    return EXIT_OK if ok and gap else EXIT_THRESHOLD


COMMANDS = {
    "gen-points": cmd_gen_points,
    "mesh-stats": cmd_mesh_stats,
    "coeff-table": cmd_coeff_table,
    "assemble": cmd_assemble,
    "spectrum": cmd_spectrum,
    "scaling": cmd_scaling,
    "deff": cmd_deff,
    "bands": cmd_bands,
    "compare-sampling": cmd_compare_sampling,
}


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig fields")
    common.add_argument("--print-config", action="store_true",
                        help="print the resolved configuration and exit")
    common.add_argument("--d", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--s", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--sizes", type=_int_list, help="comma-separated list of n")
    common.add_argument("--seed", type=int, help="single seed")
    common.add_argument("--seeds", type=_int_list, help="comma-separated seeds")
    common.add_argument("--points", help="point-set file (text or JSON)")
    common.add_argument("--method", "--generator", dest="generator",
                        choices=["riesz", "random", "file"])
    common.add_argument("--mmax", type=int, help="series truncation degree")
    common.add_argument("--qmc-samples", type=int,
                        help="assemble by Monte Carlo with this many directions")
    common.add_argument("--riesz-iters", type=int)
    common.add_argument("--antipodal-weight", type=float)
    common.add_argument("--grid-resolution", type=int)
    common.add_argument("--kind", choices=["mass", "stiffness"])
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--threads", type=int, help="accepted for compatibility; runs serially")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="reluk-sphere",
                                     description="Gram matrices of ReLU^k features on spheres")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "assemble":
            p.add_argument("--weighted", action="store_true", help="divide by n (tau_j = 1/n)")
            p.add_argument("--matrix-out", help="matrix file (.csv or .bin)")
        if name == "deff":
            p.add_argument("--grid", type=int, default=60, help="number of lambda values")
    return parser


_FLAG_FIELDS = ("d", "k", "s", "n", "sizes", "points", "generator", "mmax", "qmc_samples",
                "riesz_iters", "antipodal_weight", "grid_resolution", "kind", "out", "format",
                "threads", "seeds")


def resolve_config(args, environ=os.environ) -> ExperimentConfig:
    """Defaults < environment < config file < flags."""
    values = asdict(ExperimentConfig())
    if environ.get(OUT_ENV):
        values["out"] = environ[OUT_ENV]
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        unknown = set(loaded) - set(values)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for name in _FLAG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if args.seed is not None:
        values["seeds"] = [args.seed]
    if values.get("points") and args.generator is None:
        values["generator"] = "file"
    cfg = ExperimentConfig(**values)
    if cfg.kind == "mass" and args.s is not None and args.s > 0 and args.kind is None:
        cfg.kind = "stiffness"
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.print_config:
            print(json.dumps(asdict(cfg), indent=1, sort_keys=True))
            return EXIT_OK
        return COMMANDS[args.command](cfg, args)
    except (UsageError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EigenSolverError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
