"""Single-component Metropolis-Hastings over degrees-of-freedom vectors.

Each sweep updates every component in turn with a Gaussian random-walk
proposal truncated to the prior support. Because truncation makes the
proposal asymmetric near the bounds, the acceptance ratio carries the two
truncation normalizers. A chain runs in three stages: proposal tuning,
burn-in and sampling; only the sampling stage is stored.
"""

from dataclasses import dataclass, field
import configparser
import logging
import math

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from .copula import DensityWorkspace, DofVector, PseudoSample, log_likelihood

__all__ = [
    "PriorSpec",
    "ProposalSpec",
    "ChainConfig",
    "PosteriorSample",
    "ChainDiagnostics",
    "log_truncated_mass",
    "truncated_normal_draw",
    "truncated_normal_logpdf",
    "mh_log_accept_ratio",
    "mh_step",
    "tune_proposals",
    "sample_chain",
    "run_chain",
    "autocorrelation",
    "diagnostics",
    "batch_means_se",
    "point_estimates",
    "save_chain",
    "load_chain",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PriorSpec:
    """Flat prior on the open box ``(lower, upper)^m``."""

    lower: float = 1.0
    upper: float = 100.0

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("prior requires lower < upper")

    def log_density(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.all((theta > self.lower) & (theta < self.upper)):
            return -theta.size * math.log(self.upper - self.lower)
        return -math.inf

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all((theta > self.lower) & (theta < self.upper)))


@dataclass
class ProposalSpec:
    sigma: np.ndarray
    target_acceptance: float = 0.234
    tuned_acceptance: np.ndarray = None

    def __post_init__(self):
        self.sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float)).copy()
        if np.any(~(self.sigma > 0)):
            raise ValueError("proposal standard deviations must be positive")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target acceptance must lie in (0, 1)")


@dataclass(frozen=True)
class ChainConfig:
    n_tune: int = 10_000
    n_burn: int = 20_000
    n_sample: int = 100_000
    seed: int = 0
    tune_window: int = 100

    def __post_init__(self):
        if min(self.n_tune, self.n_burn) < 0 or self.n_sample < 1:
            raise ValueError("chain lengths must be >= 0 and n_sample >= 1")
        if self.tune_window < 1:
            raise ValueError("tune_window must be >= 1")


@dataclass
class PosteriorSample:
    """Stored post-burn-in sweeps of one chain.

    ``draws`` holds one row of group dof values per sweep and ``log_lik`` the
    log-likelihood of that row.
    """

    draws: np.ndarray
    log_lik: np.ndarray
    acceptance_rate: np.ndarray
    model_id: object = None
    proposal_sigma: np.ndarray = None
    tuned_acceptance: np.ndarray = None
    n_failed: int = 0
    seed: int = None
    prior: PriorSpec = field(default_factory=PriorSpec)

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim == 1:
            self.draws = self.draws[:, None]
        self.log_lik = np.asarray(self.log_lik, dtype=float)
        self.acceptance_rate = np.atleast_1d(np.asarray(self.acceptance_rate, dtype=float))
        if self.draws.shape[0] != self.log_lik.size:
            raise ValueError("one log-likelihood per draw required")

    @property
    def n_draws(self):
        return self.draws.shape[0]

    @property
    def n_params(self):
        return self.draws.shape[1]

    def truncated(self, n):
        """Last ``n`` sweeps as a new chain."""
        return PosteriorSample(self.draws[-n:], self.log_lik[-n:], self.acceptance_rate,
                               self.model_id, self.proposal_sigma, self.tuned_acceptance,
                               self.n_failed, self.seed, self.prior)


# ---------------------------------------------------------------------------
# truncated Gaussian proposal


def log_truncated_mass(center, sigma, lower, upper):
    """log P(lower < N(center, sigma^2) < upper), stable in both tails."""
    a = (lower - center) / sigma
    b = (upper - center) / sigma
    if a > 0:
        # mass sits in the upper tail; mirror so log_ndtr stays accurate
        a, b = -b, -a
    lb = log_ndtr(b)
    la = log_ndtr(a)
    return float(lb + math.log1p(-math.exp(la - lb)))


def truncated_normal_logpdf(x, center, sigma, lower, upper):
    if not lower < x < upper:
        return -math.inf
    z = (x - center) / sigma
    return (-0.5 * z * z - 0.5 * math.log(2 * math.pi) - math.log(sigma)
            - log_truncated_mass(center, sigma, lower, upper))


def truncated_normal_draw(center, sigma, lower, upper, rng):
    """Inverse-CDF draw; consumes exactly one uniform from ``rng``."""
    u = rng.random()
    a = (lower - center) / sigma
    b = (upper - center) / sigma
    flip = a > 0
    if flip:
        a, b = -b, -a
    pa, pb = ndtr(a), ndtr(b)
    z = ndtri(pa + u * (pb - pa))
    if flip:
        z = -z
    x = center + sigma * z
    # guard against rounding onto the bound
    eps = 1e-12 * (upper - lower)
    return float(min(max(x, lower + eps), upper - eps))


def mh_log_accept_ratio(lp_current, lp_proposed, log_q_reverse, log_q_forward):
    """log of pi(y) q(x|y) / (pi(x) q(y|x)); ``-inf`` when the proposal is impossible."""
    if lp_proposed == -math.inf:
        return -math.inf
    return (lp_proposed - lp_current) + (log_q_reverse - log_q_forward)


def mh_step(state, component, logpost, proposal, prior, rng, lp_current=None):
    """One single-component Metropolis-Hastings update.

    Parameters
    ----------
    state : array_like
        Current parameter vector (inside the prior box).
    component : int
        Index updated by this step.
    logpost : callable
        Log posterior (up to a constant) of a full parameter vector.
    proposal : ProposalSpec
    prior : PriorSpec
    rng : numpy.random.Generator
    lp_current : float, optional
        ``logpost(state)`` if already known.

    Returns
    -------
    (new_state, accepted, lp_new, failed)
        ``failed`` is True if evaluating the proposal raised; the step is
        then rejected and the state left unchanged.
    """
    state = np.array(state, dtype=float)
    if lp_current is None:
        lp_current = logpost(state)
    sigma = proposal.sigma[component]
    lo, hi = prior.lower, prior.upper
    cur = state[component]
    prop = truncated_normal_draw(cur, sigma, lo, hi, rng)
    log_q_fwd = truncated_normal_logpdf(prop, cur, sigma, lo, hi)
    log_q_rev = truncated_normal_logpdf(cur, prop, sigma, lo, hi)
    candidate = state.copy()
    candidate[component] = prop
    log_u = math.log(rng.random())
    try:
        lp_prop = logpost(candidate)
    except (ArithmeticError, ValueError) as exc:
        logger.debug("logpost failed at %s: %s", candidate, exc)
        return state, False, lp_current, True
    if not np.isfinite(lp_prop) and lp_prop != -math.inf:
        return state, False, lp_current, True
    if log_u < mh_log_accept_ratio(lp_current, lp_prop, log_q_rev, log_q_fwd):
        return candidate, True, lp_prop, False
    return state, False, lp_current, False


# ---------------------------------------------------------------------------
# chains


def _default_sigma(prior, m):
    return np.full(m, 0.1 * (prior.upper - prior.lower))


def _tune(logpost, prior, state, lp, rng, n_tune, window, proposal):
    """Stochastic multiplicative adaptation; returns (proposal, state, lp, failures)."""
    m = state.size
    sigma = proposal.sigma.copy()
    target = proposal.target_acceptance
    accepted = np.zeros(m)
    history = []
    n_failed = 0
    steps = 0
    window_index = 0
    for sweep in range(n_tune):
        for k in range(m):
            state, acc, lp, failed = mh_step(
                state, k, logpost, ProposalSpec(sigma, target), prior, rng, lp)
            accepted[k] += acc
            n_failed += failed
        steps += 1
        if steps == window or sweep == n_tune - 1:
            window_index += 1
            rate = accepted / steps
            history.append(rate)
            delta = 1.0 / window_index
            sigma = sigma * np.exp(np.where(rate > target, delta, -delta))
            sigma = np.minimum(sigma, 10.0 * (prior.upper - prior.lower))
            accepted[:] = 0
            steps = 0
    tail = max(1, len(history) // 10)
    final = np.mean(history[-tail:], axis=0) if history else np.full(m, np.nan)
    if history and np.any(np.abs(final - target) > 0.12):
        logger.warning("proposal tuning ended with acceptance %s (target %.3g)",
                       np.round(final, 3), target)
    return ProposalSpec(sigma, target, final), state, lp, n_failed


def tune_proposals(logpost, prior, init, rng, n_tune=10_000, window=100,
                   target_acceptance=0.234, sigma0=None):
    """Pre-tune per-component proposal widths toward a target acceptance rate.

    Every ``window`` sweeps each component's width is multiplied by
    ``exp(+d)`` if its acceptance in that window was above target and by
    ``exp(-d)`` otherwise, with ``d = 1 / window_index``. The returned
    proposal records the mean acceptance over the last tenth of the windows.
    """
    state = np.array(init, dtype=float)
    if not prior.contains(state):
        raise ValueError("initial state outside prior support")
    sigma = _default_sigma(prior, state.size) if sigma0 is None else sigma0
    proposal = ProposalSpec(sigma, target_acceptance)
    proposal, _, _, _ = _tune(logpost, prior, state, logpost(state), rng, n_tune,
                              window, proposal)
    return proposal


def sample_chain(loglik, init, prior, chain_cfg, rng=None, proposal=None,
                 model_id=None, progress_every=0):
    """Run tune / burn-in / sampling for an arbitrary log-likelihood.

    ``loglik(theta)`` returns the log-likelihood of a parameter vector; the
    prior is flat on the box, so the log posterior is the log-likelihood
    inside the box and ``-inf`` outside.
    """
    rng = np.random.default_rng(chain_cfg.seed) if rng is None else rng
    log_prior = -len(np.atleast_1d(init)) * math.log(prior.upper - prior.lower)

    def logpost(theta):
        if not prior.contains(theta):
            return -math.inf
        return loglik(theta) + log_prior

    state = np.array(init, dtype=float)
    if not prior.contains(state):
        raise ValueError("initial state outside prior support")
    m = state.size
    lp = logpost(state)
    if not np.isfinite(lp):
        raise FloatingPointError(f"non-finite log posterior at the initial state {state}")
    if proposal is None:
        proposal = ProposalSpec(_default_sigma(prior, m))
    n_failed = 0
    if chain_cfg.n_tune > 0:
        proposal, state, lp, n_failed = _tune(
            logpost, prior, state, lp, rng, chain_cfg.n_tune, chain_cfg.tune_window, proposal)
    # proposal widths are frozen from here on
    for sweep in range(chain_cfg.n_burn):
        for k in range(m):
            state, _, lp, failed = mh_step(state, k, logpost, proposal, prior, rng, lp)
            n_failed += failed
    n = chain_cfg.n_sample
    draws = np.empty((n, m))
    lls = np.empty(n)
    accepted = np.zeros(m)
    for sweep in range(n):
        for k in range(m):
            state, acc, lp, failed = mh_step(state, k, logpost, proposal, prior, rng, lp)
            accepted[k] += acc
            n_failed += failed
        draws[sweep] = state
        lls[sweep] = lp - log_prior
        if progress_every and (sweep + 1) % progress_every == 0:
            logger.info("model %s: sweep %d/%d, acceptance %s", model_id, sweep + 1, n,
                        np.round(accepted / (sweep + 1), 3))
    if not np.all(np.isfinite(lls)):
        raise FloatingPointError("non-finite log-likelihood stored in chain")
    return PosteriorSample(draws, lls, accepted / n, model_id, proposal.sigma.copy(),
                           proposal.tuned_acceptance, n_failed, chain_cfg.seed, prior)


def run_chain(sample, config, corr, prior=None, chain_cfg=None, rng=None, init=None,
              rel_tol=None, progress_every=0):
    """Posterior sampling of the group dof values of one t-copula model.

    The chain starts from independent uniform draws on the prior support.
    Each sweep updates the ``m`` group dof values one at a time; the density
    workspace keeps the t-quantiles of unchanged dimensions.
    """
    prior = prior or PriorSpec()
    chain_cfg = chain_cfg or ChainConfig()
    if not isinstance(sample, PseudoSample):
        sample = PseudoSample(sample)
    rng = np.random.default_rng(chain_cfg.seed) if rng is None else rng
    m = config.n_groups
    if init is None:
        init = rng.uniform(prior.lower, prior.upper, size=m)
    elif isinstance(init, DofVector):
        init = config.collapse(init.values)
    ws = DensityWorkspace()
    kwargs = {} if rel_tol is None else {"rel_tol": rel_tol}

    def loglik(theta):
        return log_likelihood(sample, config, config.expand(theta), corr, ws, **kwargs)

    return sample_chain(loglik, init, prior, chain_cfg, rng, model_id=config,
                        progress_every=progress_every)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class ChainDiagnostics:
    tau_hat: np.ndarray
    g_max: np.ndarray
    ess: np.ndarray
    batch_se: np.ndarray
    Q: int
    L: int
    mean: np.ndarray = None
    sd: np.ndarray = None


def autocorrelation(x, max_lag):
    """Sample autocorrelations rho(1..max_lag) by direct summation."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    c0 = np.dot(d, d)
    if c0 == 0:
        return np.zeros(max_lag)
    return np.array([np.dot(d[:-g], d[g:]) / c0 for g in range(1, max_lag + 1)])


def _tau_hat(x, threshold=0.01, max_lag=None):
    x = np.asarray(x, dtype=float)
    n = x.size
    max_lag = max_lag or max(1, min(n // 10, 1000))
    d = x - x.mean()
    c0 = np.dot(d, d)
    if c0 == 0:
        return 1.0, 1
    total = 0.0
    for g in range(1, max_lag + 1):
        rho = np.dot(d[:-g], d[g:]) / c0
        total += rho
        if rho < threshold:
            return max(1.0, 1.0 + 2.0 * total), g
    logger.warning("autocorrelation stayed above %.3g up to lag %d", threshold, max_lag)
    return max(1.0, 1.0 + 2.0 * total), max_lag


def batch_means_se(x, Q=50):
    """Standard error of the mean from ``Q`` non-overlapping batch means.

    The earliest ``N mod Q`` draws are dropped so the batches are equal.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 2 * Q:
        raise ValueError(f"need at least {2 * Q} draws for {Q} batches, got {n}")
    L = n // Q
    means = x[n - Q * L:].reshape(Q, L, *x.shape[1:]).mean(axis=1)
    return np.sqrt(np.var(means, axis=0, ddof=1) / Q), L


def diagnostics(chain, Q=50, threshold=0.01, max_lag=None):
    """Autocorrelation time, ESS and batch-means standard errors per component."""
    draws = chain.draws if isinstance(chain, PosteriorSample) else np.asarray(chain, float)
    if draws.ndim == 1:
        draws = draws[:, None]
    n, m = draws.shape
    if n < 2 * Q:
        raise ValueError(f"need at least {2 * Q} draws for {Q} batches, got {n}")
    taus = np.empty(m)
    gmax = np.empty(m, dtype=int)
    for k in range(m):
        taus[k], gmax[k] = _tau_hat(draws[:, k], threshold, max_lag)
    se, L = batch_means_se(draws, Q)
    return ChainDiagnostics(taus, gmax, n / taus, se, Q, L, draws.mean(axis=0),
                            draws.std(axis=0, ddof=1))


def point_estimates(chain):
    """(MAP, MMSE): the stored draw with the largest log-likelihood and the mean.

    Ties resolve to the earliest draw.
    """
    if chain.n_draws == 0:
        raise ValueError("empty chain")
    best = int(np.argmax(chain.log_lik))
    return chain.draws[best].copy(), chain.draws.mean(axis=0)


# ---------------------------------------------------------------------------
# persistence


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.atleast_1d(values))


def save_chain(chain, path, meta=None):
    """Write ``path`` (one row per sweep) and ``path + ".meta"`` (key = value).

    ``meta`` adds free-form entries such as the model id or a cache digest.
    """
    n, m = chain.draws.shape
    table = np.column_stack([np.arange(n), chain.draws, chain.log_lik])
    header = ",".join(["sweep"] + [f"nu_{k + 1}" for k in range(m)] + ["log_lik"])
    np.savetxt(path, table, delimiter=",", header=header, comments="",
               fmt=["%d"] + ["%.17g"] * (m + 1))
    cp = configparser.ConfigParser()
    cp["chain"] = {
        "model_id": str(getattr(chain.model_id, "group_of", chain.model_id)),
        "seed": str(chain.seed),
        "n_draws": str(n),
        "n_params": str(m),
        "acceptance_rate": _fmt(chain.acceptance_rate),
        "proposal_sigma": _fmt(chain.proposal_sigma) if chain.proposal_sigma is not None else "",
        "tuned_acceptance": (_fmt(chain.tuned_acceptance)
                             if chain.tuned_acceptance is not None else ""),
        "n_failed": str(chain.n_failed),
        "prior_lower": repr(chain.prior.lower),
        "prior_upper": repr(chain.prior.upper),
    }
    if meta:
        cp["meta"] = {str(k): str(v) for k, v in meta.items()}
    with open(str(path) + ".meta", "w") as fh:
        cp.write(fh)


def load_chain(path):
    """Inverse of :func:`save_chain`; returns ``(PosteriorSample, meta dict)``."""
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cp = configparser.ConfigParser()
    if not cp.read(str(path) + ".meta"):
        raise FileNotFoundError(f"missing metadata file for chain {path}")
    c = cp["chain"]

    def vec(key):
        return np.array([float(x) for x in c[key].split()]) if c.get(key) else None

    seed = c.get("seed")
    chain = PosteriorSample(
        table[:, 1:-1], table[:, -1], vec("acceptance_rate"),
        model_id=c.get("model_id"), proposal_sigma=vec("proposal_sigma"),
        tuned_acceptance=vec("tuned_acceptance"), n_failed=int(c.get("n_failed", 0)),
        seed=None if seed in (None, "None") else int(seed),
        prior=PriorSpec(float(c["prior_lower"]), float(c["prior_upper"])))
    meta = dict(cp["meta"]) if cp.has_section("meta") else {}
    return chain, meta
