import math

import numpy as np
import pytest

from reluk_sphere.coefficients import band_index, xi_table
from reluk_sphere.gegenbauer import ladder_values
from reluk_sphere.gram import assemble_mass, mass_diagonal, weighted
from reluk_sphere.sphere_points import PointSet, riesz_minimize, sample_uniform
from reluk_sphere.spectra import (
    EigenSolverError,
    SpectrumReport,
    asymptotic_window,
    condition_sweep,
    counting_function,
    default_j_range,
    effective_dimension,
    eig_sym,
    fit_power_law,
    plateau_check,
    spectrum_law_fit,
    theoretical_exponent,
)

OCTAHEDRON = np.vstack([np.eye(3), -np.eye(3)])


def report_from(eigs):
    eigs = np.sort(np.asarray(eigs, dtype=float))[::-1]
    return SpectrumReport(eigenvalues=eigs, residual_norm=0.0, n=len(eigs))


def test_eig_sym_examples():
    r = eig_sym(np.eye(5))
    assert np.allclose(r.eigenvalues, 1.0)
    assert r.condition_number == pytest.approx(1.0)
    r = eig_sym(np.diag([1.0, 4.0]))
    assert r.eigenvalues.tolist() == [4.0, 1.0]
    assert r.condition_number == 4.0


def test_eig_sym_random_residual_and_trace():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((50, 50))
    A = B + B.T
    r = eig_sym(A, keep_vectors=True)
    assert r.residual_norm <= 1e-12
    assert r.trace == pytest.approx(np.trace(A), rel=1e-10, abs=1e-10 * np.abs(A).max())
    assert np.all(np.diff(r.eigenvalues) <= 0)
    V = r.eigenvectors
    assert np.allclose(V.T @ V, np.eye(50), atol=1e-12)


def test_eig_sym_rejects_bad_input():
    with pytest.raises(ValueError):
        eig_sym(np.array([[1.0, 2.0], [2.0 + 1e-15, 1.0]]))
    with pytest.raises(ValueError):
        eig_sym(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        eig_sym(np.ones((2, 3)))
    assert issubclass(EigenSolverError, RuntimeError)


def test_eig_sym_deterministic():
    g = assemble_mass(sample_uniform(2, 30, 1), 1, 200)
    a, b = eig_sym(g), eig_sym(g)
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.metadata["kind"] == "mass"


def test_scaling_equivariance():
    g = assemble_mass(sample_uniform(2, 40, 2), 1, 200)
    r = eig_sym(g)
    rw = eig_sym(weighted(g))
    assert np.allclose(rw.eigenvalues, r.eigenvalues / 40, rtol=1e-12, atol=1e-14 * r.eigenvalues[0])


def test_theoretical_exponents():
    assert theoretical_exponent(2, 1) == 2.5
    assert theoretical_exponent(2, 2) == 3.5
    assert theoretical_exponent(2, 1, 1) == 1.5
    assert theoretical_exponent(3, 2, 2) == pytest.approx(4 / 3)


def test_fit_exact_power_law():
    j = np.arange(1, 101)
    fit = fit_power_law(j, j ** -2.0)
    assert abs(fit.slope + 2.0) <= 1e-12
    assert fit.r_squared == pytest.approx(1.0)
    r = report_from(np.arange(1, 401) ** -2.0)
    assert abs(spectrum_law_fit(r).slope + 2.0) <= 1e-12
    assert default_j_range(400) == (4, 120)


def test_fit_rejects_short_window():
    r = report_from(np.arange(1, 11) ** -1.0)
    with pytest.raises(ValueError):
        spectrum_law_fit(r, (2, 4))
    with pytest.raises(ValueError):
        fit_power_law([1.0], [1.0])


def test_lambda_max_row_sum_bound():
    for k in (0, 1, 2):
        ps = sample_uniform(2, 60, k)
        g = assemble_mass(ps, k, 200)
        assert eig_sym(g).eigenvalues[0] <= 60 * mass_diagonal(2, k) * (1 + 1e-12)


def test_octahedron_plateau_exact_design():
    # the octahedron integrates every polynomial of degree <= 3 exactly, so
    # P(0) and P(1) are multiples of orthogonal projections onto the low bands
    ps = PointSet(d=2, points=OCTAHEDRON)
    xi = xi_table(2, 1, 400)
    r = eig_sym(assemble_mass(ps, 1, 400))
    bands = band_index(2, 1, 400)
    assert r.eigenvalues[bands[1] - 1] >= 6 * xi.values[1] * (1 - 1e-8)
    assert r.eigenvalues[bands[0] - 1] >= 6 * xi.values[0] * (1 - 1e-8)


def test_octahedron_band_projection():
    # direct check of the design property behind the plateau bound
    t = OCTAHEDRON @ OCTAHEDRON.T
    P1 = ladder_values(2, 1, t)[1]
    assert np.allclose(P1 @ P1, 6 * P1, atol=1e-12)


def test_plateau_records_on_riesz_set():
    ps = riesz_minimize(2, 100, seed=0, max_iters=400).points
    xi = xi_table(2, 1, 300)
    r = eig_sym(assemble_mass(ps, 1, 300))
    recs = plateau_check(r, band_index(2, 1, 300), xi)
    degrees = [rec.m for rec in recs]
    assert 2 in degrees
    limit = 0.5 * math.sqrt(100)
    assert all(m <= limit for m in degrees)
    two = next(rec for rec in recs if rec.m == 2)
    assert two.ratio_lower >= 0.5
    assert two.ratio_upper <= 5


def test_plateau_weighted_scale():
    ps = riesz_minimize(2, 60, seed=1, max_iters=300).points
    g = assemble_mass(ps, 1, 200)
    xi = xi_table(2, 1, 200)
    bands = band_index(2, 1, 200)
    a = plateau_check(eig_sym(g), bands, xi)
    b = plateau_check(eig_sym(weighted(g)), bands, xi, n_scale=1)
    for x, y in zip(a, b):
        assert x.ratio_lower == pytest.approx(y.ratio_lower, rel=1e-10)


def test_effective_dimension_properties():
    g = assemble_mass(sample_uniform(2, 80, 4), 1, 200)
    r = eig_sym(g)
    grid = np.geomspace(r.eigenvalues[-1] * 1e-3, r.eigenvalues[0] * 1e3, 60)
    curve = effective_dimension(r, grid)
    assert np.all(np.diff(curve.d_eff) < 0)
    assert np.all(curve.d_eff > 0)
    assert np.all(curve.d_eff <= np.minimum(r.n, r.trace / grid) * (1 + 1e-12))
    rank = int(np.sum(r.eigenvalues > r.eigenvalues[0] * 1e-12))
    tiny = effective_dimension(r, [r.eigenvalues[-1] * 1e-9]).d_eff[0]
    assert tiny == pytest.approx(rank, rel=1e-6)
    with pytest.raises(ValueError):
        effective_dimension(r, [0.0])


def test_effective_dimension_exact_power_law():
    # for lambda_j = j^-a, d_eff(lambda) ~ lambda^(-1/a) away from the ends
    n = 4000
    r = report_from(n * np.arange(1, n + 1) ** -2.5)
    curve = effective_dimension(r, [1.0], window=(n * 1e-6, n * 1e-2))
    assert curve.fit.slope == pytest.approx(0.4, rel=0.05)


def test_counting_trivial_cases():
    r = report_from([5.0, 3.0, 1.0])
    c = counting_function(r, [6.0, 5.0, 2.0, 1.0, 0.5])
    assert c.counts.tolist() == [0, 1, 2, 3, 3]
    with pytest.raises(ValueError):
        counting_function(r, [-1.0])


def test_counting_exact_power_law():
    n = 4000
    r = report_from(n * np.arange(1, n + 1) ** -2.5)
    c = counting_function(r, [1.0], window=(n * 1e-6, n * 1e-2))
    assert c.fit.slope == pytest.approx(0.4, rel=0.05)


def test_asymptotic_window_on_riesz_set():
    ps = riesz_minimize(2, 100, seed=0, max_iters=400).points
    r = eig_sym(assemble_mass(ps, 1, 300))
    lo, hi = asymptotic_window(r, 2, 1)
    assert lo == pytest.approx(10 * r.eigenvalues[-1])
    assert hi == r.eigenvalues[9]
    with pytest.raises(ValueError):
        asymptotic_window(report_from([1.0, 0.5]), 2, 1)


def test_condition_sweep_records_and_fit():
    res = condition_sweep(2, 1, 0, [20, 30, 40, 60], lambda n, s: sample_uniform(2, n, s), seeds=[0, 1],
                          grid_resolution=16)
    assert res.theoretical == 2.5
    assert len(res.records) == 8
    assert set(res.medians()) == {20, 30, 40, 60}
    assert res.fit is not None and res.fit.points == 4
    with pytest.raises(ValueError):
        condition_sweep(2, 1, 0, [20, 30, 40], lambda n, s: sample_uniform(2, n, s))


def test_condition_sweep_flags_singular():
    def duplicated(n, seed):
        X = sample_uniform(2, n - 1, seed).points
        return PointSet(d=2, points=np.vstack([X, X[:1]]))

    res = condition_sweep(2, 1, 0, [10, 12, 14, 16], duplicated, grid_resolution=16)
    assert all(rec.singular for rec in res.records)
    assert res.fit is None
    assert math.isinf(res.deviation)


def test_stiffness_sweep_theoretical():
    res = condition_sweep(2, 1, 1, [10, 15, 20, 25], lambda n, s: sample_uniform(2, n, s),
                          kind="stiffness", grid_resolution=16)
    assert res.theoretical == 1.5
