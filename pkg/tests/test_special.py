import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from gtcopula import special
from gtcopula.quadrature import integrate_adaptive


def test_t_cdf_symmetry_and_cauchy():
    assert special.t_cdf(0.0, 4) == 0.5
    assert special.t_cdf(1.0, 1) == pytest.approx(0.75, abs=1e-15)


def test_t_cdf_matches_integrated_density():
    # t_7(1.5) = 1/2 + int_0^1.5 f_7
    f = lambda x: math.exp(special.t_logpdf(x, 7.0))
    res = integrate_adaptive(f, 0.0, 1.5, rel_tol=1e-13)
    assert special.t_cdf(1.5, 7) == pytest.approx(0.5 + res.value, abs=1e-12)


def test_t_cdf_domain_errors():
    with pytest.raises(ValueError):
        special.t_cdf(0.3, 0.0)
    with pytest.raises(ValueError):
        special.t_cdf(np.inf, 3.0)


def test_t_quantile_examples():
    assert special.t_quantile(0.5, 10) == 0.0
    assert special.t_quantile(0.75, 1) == pytest.approx(1.0, abs=1e-14)


def test_t_quantile_against_bisection():
    target = 0.975
    lo, hi = 0.0, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if special.t_cdf(mid, 5) < target:
            lo = mid
        else:
            hi = mid
    assert special.t_quantile(target, 5) == pytest.approx(0.5 * (lo + hi), abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, np.nan])
def test_t_quantile_domain(p):
    with pytest.raises(ValueError):
        special.t_quantile(p, 3.0)


@pytest.mark.parametrize("nu", [1.0, 2.5, 10.0, 100.0])
def test_t_round_trip(nu):
    p = np.concatenate([np.logspace(-6, -1, 30), np.linspace(0.1, 0.9, 41),
                        1 - np.logspace(-1, -6, 30)])
    back = special.t_cdf(special.t_quantile(p, nu), nu)
    np.testing.assert_allclose(back, p, rtol=0, atol=1e-10)


def test_chi_w_unit_point():
    from scipy import stats
    nu = 4.0
    # v with chi2_quantile(1 - v) = nu
    v = stats.chi2.sf(nu, nu)
    assert special.chi_w_quantile(v, nu) == pytest.approx(1.0, abs=1e-12)


def test_chi_w_median_monte_carlo():
    rng = np.random.default_rng(7)
    s = rng.chisquare(4.0, size=10_000_000)
    mc = np.median(np.sqrt(4.0 / s))
    # MC median SE ~ 1 / (2 f(m) sqrt(N)) is below 1e-3 here
    assert special.chi_w_quantile(0.5, 4.0) == pytest.approx(mc, abs=1e-3)


@pytest.mark.parametrize("nu", [0.7, 1.0, 4.0, 30.0, 99.0])
def test_chi_w_strictly_increasing(nu):
    v = np.linspace(1e-6, 1 - 1e-6, 1000)
    w = special.chi_w_quantile(v, nu)
    assert np.all(np.diff(w) > 0)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-8, 1 - 1e-8), st.floats(0.5, 120.0))
def test_chi_w_cdf_inverts_quantile(v, nu):
    w = special.chi_w_quantile(v, nu)
    assert special.chi_w_cdf(w, nu) == pytest.approx(v, rel=1e-9, abs=1e-14)


def test_chi2_quantile_both_tails():
    from scipy import stats
    for q in (1e-9, 0.3, 0.5, 0.7, 1 - 1e-9):
        assert special.chi2_quantile(q, 6.0) == pytest.approx(stats.chi2.ppf(q, 6.0), rel=1e-8)


def test_log_gamma_examples():
    assert special.log_gamma(1.0) == 0.0
    assert special.log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-15)
    assert special.log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-15)
    with pytest.raises(ValueError):
        special.log_gamma(0.0)


def test_log_gamma_recurrence():
    x = np.linspace(0.5, 200.0, 2001)
    lhs = special.log_gamma(x + 1)
    rhs = special.log_gamma(x) + np.log(x)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


def test_t_logpdf_normalized():
    for nu in (1.5, 8.0):
        total, _ = integrate.quad(lambda x: math.exp(special.t_logpdf(x, nu)), -np.inf, np.inf)
        assert total == pytest.approx(1.0, abs=1e-9)
