import math

import numpy as np
import pytest
from scipy import integrate, stats

from gtcopula.copula import CorrelationMatrix, GroupConfig, mle_fit, simulate
from gtcopula.mcmc import (ChainConfig, PosteriorSample, PriorSpec, ProposalSpec,
                           autocorrelation, batch_means_se, diagnostics, load_chain,
                           mh_log_accept_ratio, mh_step, point_estimates, run_chain,
                           sample_chain, save_chain, truncated_normal_draw,
                           truncated_normal_logpdf, tune_proposals)

# ---------------------------------------------------------------------------
# discrete analog of the truncated Gaussian proposal

TARGET = np.array([0.2, 0.3, 0.5])
STATES = np.arange(3)


def discrete_proposal(sigma):
    """q[i, j]: Gaussian weights on {0, 1, 2} centred at i, renormalized."""
    w = stats.norm.pdf((STATES[None, :] - STATES[:, None]) / sigma)
    return w / w.sum(axis=1, keepdims=True), w


def transition_matrix(sigma, with_normalizer=True):
    q, raw = discrete_proposal(sigma)
    logq = np.log(q) if with_normalizer else np.log(raw)
    P = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            a = mh_log_accept_ratio(math.log(TARGET[i]), math.log(TARGET[j]), logq[j, i], logq[i, j])
            P[i, j] = q[i, j] * min(1.0, math.exp(a))
        P[i, i] = 1.0 - P[i].sum()
    return P


def stationary(P):
    w, v = np.linalg.eig(P.T)
    p = np.real(v[:, np.argmin(np.abs(w - 1))])
    return p / p.sum()


def run_discrete(sigma, n_steps, seed, with_normalizer=True):
    q, raw = discrete_proposal(sigma)
    logq = np.log(q) if with_normalizer else np.log(raw)
    cum = np.cumsum(q, axis=1)
    log_pi = np.log(TARGET)
    rng = np.random.default_rng(seed)
    u_prop = rng.random(n_steps)
    log_u = np.log(rng.random(n_steps))
    counts = np.zeros(3)
    state = 0
    for t in range(n_steps):
        prop = int(np.searchsorted(cum[state], u_prop[t], side="right"))
        a = mh_log_accept_ratio(log_pi[state], log_pi[prop], logq[prop, state], logq[state, prop])
        if log_u[t] < a:
            state = prop
        counts[state] += 1
    return counts / n_steps


def test_discrete_detailed_balance_exact():
    P = transition_matrix(1.0)
    flow = TARGET[:, None] * P
    np.testing.assert_allclose(flow, flow.T, atol=1e-15)
    np.testing.assert_allclose(stationary(P), TARGET, atol=1e-12)


def test_discrete_chain_reaches_target():
    freq = run_discrete(1.0, 1_000_000, seed=1)
    np.testing.assert_allclose(freq, TARGET, atol=0.01)


def test_sampler_without_normalizer_is_wrong():
    # the boundary states sit within one sigma of the edge, so the
    # truncation masses differ and omitting their ratio biases the chain
    wrong = stationary(transition_matrix(1.0, with_normalizer=False))
    assert np.max(np.abs(wrong - TARGET)) > 0.01
    freq = run_discrete(1.0, 1_000_000, seed=1, with_normalizer=False)
    assert np.max(np.abs(freq - TARGET)) > 0.01


def test_continuous_flat_target_near_bounds_is_uniform():
    prior = PriorSpec(0.0, 1.0)
    prop = ProposalSpec([0.5])
    rng = np.random.default_rng(0)
    state = np.array([0.5])
    xs = np.empty(60_000)
    lp = 0.0
    for t in range(xs.size):
        state, _, lp, _ = mh_step(state, 0, lambda th: 0.0, prop, prior, rng, lp)
        xs[t] = state[0]
    thinned = xs[::5]
    assert stats.kstest(thinned, "uniform").pvalue > 0.001


# ---------------------------------------------------------------------------
# proposal pieces


def test_truncated_normal_density_and_draws():
    lo, hi = 1.0, 100.0
    total, _ = integrate.quad(
        lambda x: math.exp(truncated_normal_logpdf(x, 2.0, 3.0, lo, hi)), lo, hi, points=[2.0])
    assert total == pytest.approx(1.0, abs=1e-9)
    rng = np.random.default_rng(2)
    draws = np.array([truncated_normal_draw(2.0, 3.0, lo, hi, rng) for _ in range(20000)])
    assert np.all((draws > lo) & (draws < hi))
    ref = stats.truncnorm((lo - 2.0) / 3.0, (hi - 2.0) / 3.0, loc=2.0, scale=3.0)
    assert stats.kstest(draws, ref.cdf).pvalue > 0.001


def test_acceptance_examples():
    lo, hi = 1.0, 100.0
    cur, prop = 50.0, 51.0
    fwd = truncated_normal_logpdf(prop, cur, 1.0, lo, hi)
    rev = truncated_normal_logpdf(cur, prop, 1.0, lo, hi)
    assert mh_log_accept_ratio(0.0, 0.0, rev, fwd) == pytest.approx(0.0, abs=1e-12)
    a = mh_log_accept_ratio(0.0, -math.log(2.0), rev, fwd)
    assert math.exp(a) == pytest.approx(0.5, abs=1e-12)
    assert mh_log_accept_ratio(0.0, -math.inf, rev, fwd) == -math.inf


def test_failed_evaluation_keeps_state():
    def boom(theta):
        if theta[0] != 5.0:
            raise FloatingPointError("quadrature blew up")
        return 0.0

    rng = np.random.default_rng(0)
    state, acc, lp, failed = mh_step([5.0], 0, boom, ProposalSpec([1.0]), PriorSpec(), rng, 0.0)
    assert failed and not acc and state[0] == 5.0 and lp == 0.0


# ---------------------------------------------------------------------------
# chains on a Gaussian target


GAUSS_PRIOR = PriorSpec(-100.0, 100.0)


def gauss_loglik(theta):
    return -0.5 * float(theta[0]) ** 2


@pytest.fixture(scope="module")
def gauss_chain():
    cfg = ChainConfig(n_tune=5000, n_burn=2000, n_sample=100_000, seed=42)
    return sample_chain(gauss_loglik, [3.0], GAUSS_PRIOR, cfg)


def test_gaussian_chain_moments(gauss_chain):
    x = gauss_chain.draws[:, 0]
    se_mean, _ = batch_means_se(x)
    se_var, _ = batch_means_se(x * x)
    assert abs(x.mean()) < 3 * se_mean
    assert abs(np.mean(x * x) - 1.0) < 3 * se_var


def test_gaussian_chain_tuned_acceptance(gauss_chain):
    assert 0.15 <= gauss_chain.acceptance_rate[0] <= 0.35
    assert 0.15 <= gauss_chain.tuned_acceptance[0] <= 0.35


def test_tuned_sigma_optimal_scaling():
    # 2.4 is the optimal 1-d scale, reached at acceptance about 0.44
    rng = np.random.default_rng(1)
    logpost = lambda th: gauss_loglik(th)
    spec = tune_proposals(logpost, GAUSS_PRIOR, [0.5], rng, n_tune=10_000,
                          target_acceptance=0.44)
    assert 1.2 <= spec.sigma[0] <= 3.6


def test_batch_se_scales_with_root_n(gauss_chain):
    x = gauss_chain.draws[:, 0]
    se_full, _ = batch_means_se(x)
    se_quarter, _ = batch_means_se(x[:25_000])
    assert se_quarter / se_full == pytest.approx(2.0, rel=0.3)


def test_chain_respects_bounds():
    prior = PriorSpec(1.0, 3.0)
    cfg = ChainConfig(n_tune=200, n_burn=100, n_sample=5000, seed=3)
    chain = sample_chain(lambda th: -10.0 * float(th[0] - 1.0), [2.0], prior, cfg)
    assert np.all((chain.draws > 1.0) & (chain.draws < 3.0))


# ---------------------------------------------------------------------------
# diagnostics


def ar1(phi, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / math.sqrt(1 - phi * phi)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def test_ar1_autocorrelation_time():
    d = diagnostics(ar1(0.9, 200_000, seed=5))
    assert d.tau_hat[0] == pytest.approx(19.0, rel=0.3)
    rho = autocorrelation(ar1(0.9, 200_000, seed=5), 5)
    np.testing.assert_allclose(rho, 0.9 ** np.arange(1, 6), atol=0.02)


def test_iid_diagnostics():
    x = np.random.default_rng(8).standard_normal(50_000)
    d = diagnostics(x)
    assert d.tau_hat[0] == pytest.approx(1.0, abs=0.2)
    assert d.ess[0] == pytest.approx(x.size / d.tau_hat[0])
    assert d.batch_se[0] == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=0.25)


def test_diagnostics_needs_enough_draws():
    with pytest.raises(ValueError):
        diagnostics(np.arange(99.0), Q=50)


def test_batch_means_drop_earliest():
    x = np.concatenate([[1e6, 1e6, 1e6], np.tile([0.0, 1.0], 50)])
    se, L = batch_means_se(x, Q=50)
    assert L == 2
    assert se == 0.0


def test_point_estimates_examples():
    const = PosteriorSample(np.full((10, 2), 7.0), np.zeros(10), [0.3, 0.3])
    mp, mm = point_estimates(const)
    assert np.all(mp == 7.0) and np.all(mm == 7.0)
    tie = PosteriorSample(np.array([[1.0], [3.0]]), np.array([-1.0, -1.0]), [0.3])
    mp, mm = point_estimates(tie)
    assert mp[0] == 1.0 and mm[0] == 2.0


# ---------------------------------------------------------------------------
# copula chains and persistence


@pytest.fixture(scope="module")
def copula_setup():
    cfg = GroupConfig.generalized(2)
    corr = CorrelationMatrix.equicorrelated(2, 0.5)
    s = simulate(cfg, [5.0, 20.0], corr, 400, seed=13)
    return s, cfg, corr


def test_run_chain_deterministic(copula_setup):
    s, cfg, corr = copula_setup
    cc = ChainConfig(n_tune=100, n_burn=50, n_sample=200, seed=9, tune_window=25)
    a = run_chain(s, cfg, corr, chain_cfg=cc)
    b = run_chain(s, cfg, corr, chain_cfg=cc)
    assert np.array_equal(a.draws, b.draws)
    assert np.array_equal(a.log_lik, b.log_lik)
    assert np.all((a.draws > 1) & (a.draws < 100))


def test_run_chain_consistent_with_mle(copula_setup):
    s, cfg, corr = copula_setup
    cc = ChainConfig(n_tune=400, n_burn=200, n_sample=1500, seed=2, tune_window=50)
    chain = run_chain(s, cfg, corr, chain_cfg=cc)
    mle = mle_fit(s, cfg, corr)
    # the best stored draw cannot beat the optimum and comes close to it
    assert chain.log_lik.max() <= mle.loglik + 1e-6
    assert chain.log_lik.max() > mle.loglik - 2.0
    # the low-dof component is well identified; its posterior covers the MLE
    x = chain.draws[:, 0]
    assert abs(x.mean() - mle.dof.values[0]) < 2 * x.std()


def test_chain_round_trip(tmp_path, copula_setup):
    s, cfg, corr = copula_setup
    cc = ChainConfig(n_tune=20, n_burn=10, n_sample=60, seed=4, tune_window=10)
    chain = run_chain(s, cfg, corr, chain_cfg=cc)
    path = tmp_path / "chain.csv"
    save_chain(chain, path, {"model": "M0"})
    back, meta = load_chain(path)
    assert np.array_equal(back.draws, chain.draws)
    assert np.array_equal(back.log_lik, chain.log_lik)
    assert np.array_equal(back.acceptance_rate, chain.acceptance_rate)
    assert back.seed == 4
    assert meta["model"] == "M0"
