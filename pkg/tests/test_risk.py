import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gtcopula.copula import CorrelationMatrix, DofVector, GroupConfig
from gtcopula.risk import (Portfolio, compare_models, cvar_from_losses, cvar_mc, portfolio_loss,
                           read_portfolio)


def test_portfolio_loss_examples():
    assert portfolio_loss(np.zeros(3), [0.2, 0.3, 0.5]) == 0.0
    assert portfolio_loss([math.log(2.0)], [1.0]) == pytest.approx(-1.0, abs=1e-15)
    exact = portfolio_loss([0.01], [1.0])
    linear = portfolio_loss([0.01], [1.0], linear=True)
    assert abs(exact - linear) < 1e-4


def test_portfolio_warns_when_weights_do_not_sum_to_one():
    with pytest.warns(UserWarning):
        Portfolio([0.5, 0.6])
    Portfolio([0.25, 0.25, 0.8, -0.8, 0.25, 0.25])


def test_uniform_losses():
    losses = np.random.default_rng(0).random(1_000_000)
    est = cvar_from_losses(losses, 0.99)
    # mean of the top 1% of U(0, 1)
    assert est.cvar == pytest.approx(0.995, abs=4 * est.std_error)
    assert est.var == pytest.approx(0.99, abs=1e-3)
    assert est.cvar >= est.var and est.std_error > 0


def test_var_is_order_statistic():
    losses = np.arange(1.0, 101.0)
    est = cvar_from_losses(losses, 0.95)
    assert est.var == 95.0
    assert est.cvar == pytest.approx(np.mean(np.arange(95.0, 101.0)))
    assert est.n_exceed == 6 and est.few_exceedances


def test_gaussian_limit_expected_shortfall():
    # one asset, dof 1e6: the copula is Gaussian and the loss is -x with x ~ N(0, 1)
    est = cvar_mc(GroupConfig((0,)), [1e6], CorrelationMatrix.identity(1), Portfolio([1.0]),
                  0.99, 1_000_000, seed=1, linear=True)
    analytic = stats.norm.pdf(stats.norm.ppf(0.99)) / 0.01
    assert est.cvar == pytest.approx(analytic, abs=3 * est.std_error)


def test_determinism_and_seed_sensitivity():
    cfg = GroupConfig((0, 1, 1))
    corr = CorrelationMatrix.equicorrelated(3, 0.3)
    p = Portfolio([0.5, 0.25, 0.25])
    a = cvar_mc(cfg, [4.0, 20.0, 20.0], corr, p, n_sims=20_000, seed=3)
    b = cvar_mc(cfg, [4.0, 20.0, 20.0], corr, p, n_sims=20_000, seed=3)
    c = cvar_mc(cfg, [4.0, 20.0, 20.0], corr, p, n_sims=20_000, seed=4)
    assert a == b
    assert a.cvar != c.cvar


def test_batching_does_not_change_result_distribution():
    cfg = GroupConfig.standard(2)
    corr = CorrelationMatrix.equicorrelated(2, 0.3)
    p = Portfolio([0.5, 0.5])
    one = cvar_mc(cfg, [5.0, 5.0], corr, p, n_sims=200_000, seed=2)
    many = cvar_mc(cfg, [5.0, 5.0], corr, p, n_sims=200_000, seed=2, batch_size=30_000)
    assert one.cvar == pytest.approx(many.cvar, abs=4 * math.hypot(one.std_error, many.std_error))


def test_standard_error_scaling():
    cfg = GroupConfig.standard(2)
    corr = CorrelationMatrix.equicorrelated(2, 0.3)
    p = Portfolio([0.5, 0.5])
    small = cvar_mc(cfg, [5.0, 5.0], corr, p, n_sims=250_000, seed=5)
    big = cvar_mc(cfg, [5.0, 5.0], corr, p, n_sims=1_000_000, seed=6)
    assert small.std_error / big.std_error == pytest.approx(2.0, rel=0.3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.floats(0.1, 20.0), st.floats(0.9, 0.999))
def test_cvar_homogeneous_and_translation(seed, scale, alpha):
    losses = np.random.default_rng(seed).standard_normal(20_000)
    base = cvar_from_losses(losses, alpha)
    scaled = cvar_from_losses(scale * losses, alpha)
    shifted = cvar_from_losses(losses + 3.0, alpha)
    assert scaled.cvar == pytest.approx(scale * base.cvar, rel=1e-12)
    assert shifted.cvar == pytest.approx(base.cvar + 3.0, rel=1e-12)


def test_cvar_monotone_in_alpha():
    losses = np.random.default_rng(1).standard_normal(100_000)
    vals = [cvar_from_losses(losses, a).cvar for a in (0.9, 0.95, 0.99, 0.995)]
    assert np.all(np.diff(vals) > 0)


def test_cvar_argument_checks():
    cfg = GroupConfig.standard(2)
    corr = CorrelationMatrix.identity(2)
    with pytest.raises(ValueError):
        cvar_mc(cfg, [5.0, 5.0], corr, Portfolio([0.5, 0.5]), alpha=0.4)
    with pytest.raises(ValueError):
        cvar_mc(cfg, [5.0, 5.0], corr, Portfolio([0.5, 0.5]), n_sims=100)
    with pytest.raises(ValueError):
        cvar_mc(cfg, [5.0, 5.0], corr, Portfolio([0.2, 0.3, 0.5]))


def test_compare_same_model_is_exactly_zero():
    cfg = GroupConfig((0, 1))
    corr = CorrelationMatrix.equicorrelated(2, 0.3)
    m = (cfg, DofVector([4.0, 30.0]))
    c = compare_models(m, m, corr, Portfolio([0.5, 0.5]), n_sims=50_000, seed=1)
    assert c.rel_diff == 0.0 and c.rel_diff_se == 0.0


def test_compare_heavier_tails_raise_cvar():
    corr = CorrelationMatrix.equicorrelated(2, 0.7)
    light = (GroupConfig.standard(2), DofVector([80.0, 80.0]))
    heavy = (GroupConfig.standard(2), DofVector([2.5, 2.5]))
    c = compare_models(light, heavy, corr, Portfolio([0.5, 0.5]), n_sims=400_000, seed=2)
    assert c.rel_diff > 3 * c.rel_diff_se > 0


def test_read_portfolio(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("asset,weight\nEUR,0.6\nJPY,0.4\n")
    p = read_portfolio(path)
    assert p.labels == ("EUR", "JPY") and p.weights == (0.6, 0.4)
