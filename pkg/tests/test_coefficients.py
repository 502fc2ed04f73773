import math

import mpmath as mp
import numpy as np
import pytest

from reluk_sphere.gegenbauer import harmonic_dimension
from reluk_sphere.coefficients import (
    active_set,
    band_index,
    coefficient_oracle,
    default_mmax,
    falling_factorial,
    in_active_set,
    sigma_hat,
    xi_large,
    xi_s_table,
    xi_table,
)


def mp_sigma_hat(d, k, m, dps=40):
    """sigma_hat at high precision from the quotient of integrals (t = cos phi).

    Uses mpmath's Gegenbauer C_m^{(d-1)/2} (Chebyshev 2cos(m phi) for d=1);
    the quotient scales as 1/c when p_m is scaled by c, so rescale to
    p_m(1) = N(m) at the end.
    """
    with mp.workdps(dps):
        if d == 1:
            pm = lambda x: mp.mpf(1) if m == 0 else 2 * mp.cos(m * mp.acos(x))
        else:
            lam = mp.mpf(d - 1) / 2
            pm = lambda x: mp.gegenbauer(m, lam, x)
        w = lambda p: mp.sin(p) ** (d - 1)
        num = mp.quad(lambda p: pm(mp.cos(p)) * mp.cos(p) ** k * w(p), mp.linspace(0, mp.pi / 2, 8))
        den = mp.quad(lambda p: pm(mp.cos(p)) ** 2 * w(p), mp.linspace(0, mp.pi, 16))
        return float(num / den * pm(mp.mpf(1)) / harmonic_dimension(d, m))


def test_sigma_hat_examples():
    assert sigma_hat(2, 1, 3) == 0.0
    assert sigma_hat(3, 0, 0) == pytest.approx(0.5, rel=1e-14)
    o = coefficient_oracle(2, 2, 5).value
    assert sigma_hat(2, 2, 5) == pytest.approx(o, rel=1e-10)


@pytest.mark.parametrize("d,k,m", [(1, 3, 88), (2, 1, 7), (3, 0, 1), (4, 3, 8), (5, 2, 41), (2, 3, 2),
                                   (3, 2, 1), (1, 0, 0)])
def test_sigma_hat_against_high_precision(d, k, m):
    assert sigma_hat(d, k, m) == pytest.approx(mp_sigma_hat(d, k, m), rel=1e-12)


def test_sigma_hat_simple_closed_values():
    # d=2, k=0, m=1: int_0^1 3t dt / int_{-1}^1 9t^2 dt = 1/4
    assert sigma_hat(2, 0, 1) == pytest.approx(0.25, rel=1e-14)
    # d=2, k=1, m=0: mean of max(t, 0) on [-1, 1] = 1/4
    assert sigma_hat(2, 1, 0) == pytest.approx(0.25, rel=1e-14)


def test_active_set_pattern():
    mask = active_set(1, 10)
    assert np.flatnonzero(mask).tolist() == [0, 1, 2, 4, 6, 8, 10]
    assert np.flatnonzero(active_set(2, 9)).tolist() == [0, 1, 2, 3, 5, 7, 9]
    for k in range(4):
        for m in range(k + 1, 40):
            assert in_active_set(k, m) == (sigma_hat(3, k, m) != 0.0)


@pytest.mark.parametrize("d,k", [(2, 1), (3, 0), (1, 2), (4, 3)])
def test_xi_table_zero_pattern(d, k):
    t = xi_table(d, k, 60)
    assert np.all(t.values[~t.active_mask] == 0.0)
    assert np.all(t.values[t.active_mask] > 0.0)
    for m in range(61):
        assert t.values[m] == pytest.approx(sigma_hat(d, k, m) ** 2, rel=1e-10)


def test_xi_large_matches_squared_closed_form():
    for d in range(1, 6):
        for k in range(4):
            for m in range(k + 1, 300, 2):
                assert xi_large(d, k, m) == pytest.approx(sigma_hat(d, k, m) ** 2, rel=1e-10)


def _ratio_check(table, m1, m2):
    alpha = table.decay_exponent
    return table.values[m2] / table.values[m1], (m2 / m1) ** (-alpha)


@pytest.mark.parametrize("d,k", [(2, 1), (3, 1), (2, 3)])
def test_xi_decay_ratio(d, k):
    # m = 200 and 2m = 400 are active when k is odd
    t = xi_table(d, k, 400)
    got, expected = _ratio_check(t, 200, 400)
    assert expected == pytest.approx(2.0 ** -(d + 2 * k + 1))
    assert got == pytest.approx(expected, rel=0.10)


@pytest.mark.parametrize("d,k", [(2, 0), (3, 2)])
def test_xi_decay_ratio_even_k(d, k):
    # even k: active large degrees are odd, so use 201 and 401
    t = xi_table(d, k, 401)
    got, expected = _ratio_check(t, 201, 401)
    assert got == pytest.approx(expected, rel=0.10)


def test_xi_s_zero_iterations_is_mass_table():
    for d, k in [(2, 1), (3, 3), (1, 0)]:
        a = xi_table(d, k, 80)
        b = xi_s_table(d, k, 0, 80)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.active_mask, b.active_mask)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_xi_s_active_set_and_positivity(d, k):
    mass = xi_table(d, k, 120)
    for s in range(k + 1):
        t = xi_s_table(d, k, s, 120)
        assert np.array_equal(t.active_mask, mass.active_mask)
        assert np.all(t.values[t.active_mask] > 0)
        assert np.all(t.values[~t.active_mask] == 0)


def test_xi_s_decay_ratio():
    for d in (2, 3):
        for k, s in [(1, 1), (3, 1), (3, 2)]:
            t = xi_s_table(d, k, s, 400)
            got, expected = _ratio_check(t, 200, 400)
            assert expected == pytest.approx(2.0 ** -(d + 2 * k + 1 - 2 * s))
            assert got == pytest.approx(expected, rel=0.10)


def test_xi_s_matches_projection_of_reduced_kernel():
    # xi_s(m) = int p_m(t) (k)_s^2 t^s K_{k-s}(t) dmu / N(m), with K_{k-s} the mass kernel
    from reluk_sphere.gegenbauer import harmonic_dimension, ladder_values, projected_quadrature
    from reluk_sphere.gram import zonal_series

    d, k, s = 2, 2, 1
    inner = xi_table(d, k - s, 400).values

    def kernel(t):
        return falling_factorial(k, s) ** 2 * t ** s * zonal_series(d, inner, t)

    table = xi_s_table(d, k, s, 10)
    for m in range(11):
        proj = projected_quadrature(d, lambda t: ladder_values(d, m, t)[m] * kernel(t))
        assert proj / harmonic_dimension(d, m) == pytest.approx(table.values[m], rel=1e-5, abs=1e-10)


def test_xi_s_rejects_large_s():
    with pytest.raises(ValueError):
        xi_s_table(2, 1, 2, 20)


def test_oracle_examples():
    assert coefficient_oracle(2, 1, 0).value == pytest.approx(sigma_hat(2, 1, 0), rel=1e-10)
    assert abs(coefficient_oracle(2, 1, 3).value) <= 1e-12
    assert coefficient_oracle(4, 3, 8).value == pytest.approx(sigma_hat(4, 3, 8), rel=1e-10)
    with pytest.raises(ValueError):
        coefficient_oracle(2, 1, 201)


def test_band_index_examples():
    b = band_index(2, 1, 10)
    assert b[0] == 1
    assert b[1] == 4
    assert b[2] == 9
    assert b[4] == 9 + 9
    assert np.all(np.diff(b.cumulative) > 0)
    with pytest.raises(KeyError):
        b[3]


def test_falling_factorial_and_mmax():
    assert falling_factorial(3, 2) == 6
    assert falling_factorial(3, 0) == 1
    assert default_mmax(400, 2) == 200
    assert default_mmax(10000, 2) == 1000
