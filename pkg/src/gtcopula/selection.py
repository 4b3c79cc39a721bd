"""Model family enumeration and Bayesian / classical model choice.

Each candidate is a :class:`~gtcopula.copula.GroupConfig`. Models are scored
by the reciprocal importance sampling (RISE) estimate of the marginal
likelihood, by DIC, by posterior model probabilities computed from the
stored per-sweep log-likelihoods, and by likelihood-ratio tests against
the generalized model.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
import csv
import json
import logging
import math

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .copula import DensityWorkspace, GroupConfig, PseudoSample, log_likelihood, mle_fit
from .mcmc import ChainConfig, PriorSpec, diagnostics, point_estimates, run_chain

__all__ = [
    "ModelFamily",
    "enumerate_models",
    "ImportanceDensity",
    "rise_log_evidence",
    "dic",
    "posterior_model_probs",
    "lr_test",
    "ModelScore",
    "SelectionReport",
    "model_seeds",
    "fit_model",
    "score_model",
    "run_selection",
]

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# model family


@dataclass(frozen=True)
class ModelFamily:
    dim: int
    models: tuple
    policy: str = "two-group"

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if len(set(self.models)) != len(self.models):
            raise ValueError("duplicate configurations in model family")
        if any(m.dim != self.dim for m in self.models):
            raise ValueError("all models must share the family dimension")

    @property
    def ids(self):
        return [f"M{h}" for h in range(len(self.models))]

    def __len__(self):
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __getitem__(self, h):
        return self.models[h]

    def index(self, config):
        return self.models.index(config)

    def subset(self, indices):
        """Family restricted to ``indices``; ids are renumbered."""
        return ModelFamily(self.dim, [self.models[i] for i in indices], self.policy)


def _two_group_block(n, k):
    """Two-group configurations whose smaller group has ``k`` members."""
    out = []
    if 2 * k == n:
        # equal halves: fix dimension 0 in the first half so each split appears once
        for first in combinations(range(n), k):
            if first[0] == 0:
                out.append(first)
    else:
        out = list(combinations(range(n), k))
        if k == 2:
            # the published six-asset numbering leads with the last pair
            out = out[-1:] + out[:-1]
    return [GroupConfig(tuple(0 if i in f else 1 for i in range(n))) for f in out]


def _set_partitions(items):
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[head]] + part
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1:]


def enumerate_models(n, policy="two-group"):
    """Candidate t-copula configurations in report order.

    Parameters
    ----------
    n : int
        Dimension, at least 2.
    policy : {"two-group", "all"}
        ``"two-group"`` gives the generalized model, every unordered split
        into two groups (blocks of equal halves first, then by decreasing
        size of the smaller group) and the standard model. ``"all"`` also
        includes every other partition, ordered by number of groups.

    Returns
    -------
    ModelFamily
    """
    if n < 2:
        raise ValueError("dimension must be at least 2")
    if policy not in ("two-group", "all"):
        raise ValueError(f"unknown policy {policy!r}")
    generalized = GroupConfig.generalized(n)
    standard = GroupConfig.standard(n)
    models = [generalized]
    seen = {generalized, standard}
    for k in range(n // 2, 0, -1):
        for cfg in _two_group_block(n, k):
            if cfg not in seen:
                seen.add(cfg)
                models.append(cfg)
    if policy == "all":
        rest = []
        for part in _set_partitions(list(range(n))):
            cfg = GroupConfig.from_groups(part, n)
            if cfg not in seen:
                seen.add(cfg)
                rest.append(cfg)
        rest.sort(key=lambda c: (c.n_groups, c.shape, c.group_of))
        models.extend(rest)
    models.append(standard)
    return ModelFamily(n, models, policy)


# ---------------------------------------------------------------------------
# evidence and information criteria


@dataclass
class ImportanceDensity:
    """Normal or Student-t density fitted to posterior draws.

    With ``support`` set to ``(lower, upper)`` the density is truncated to
    the prior box; the missing mass is estimated by simulation.
    """

    mean: np.ndarray
    cov: np.ndarray
    family: str = "normal"
    eta: float = 5.0
    support: tuple = None
    n_mass: int = 200_000
    seed: int = 12345
    log_mass: float = field(default=0.0, init=False)

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.family not in ("normal", "t"):
            raise ValueError("family must be 'normal' or 't'")
        try:
            np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError:
            raise ValueError("importance covariance is not positive definite; "
                             "use the t family or regularize the chain covariance") from None
        if np.min(np.linalg.eigvalsh(self.cov)) <= 1e-12 * max(1.0, np.max(np.diag(self.cov))):
            raise ValueError("importance covariance is numerically singular; "
                             "use the t family or regularize the chain covariance")
        if self.family == "normal":
            self._dist = stats.multivariate_normal(self.mean, self.cov)
        else:
            # scale chosen so the t density has the fitted covariance
            scale = self.cov * (self.eta - 2.0) / self.eta if self.eta > 2 else self.cov
            self._dist = stats.multivariate_t(self.mean, scale, df=self.eta)
        if self.support is not None:
            lo, hi = self.support
            x = self._dist.rvs(size=self.n_mass, random_state=np.random.default_rng(self.seed))
            x = np.asarray(x).reshape(self.n_mass, -1)
            inside = np.mean(np.all((x > lo) & (x < hi), axis=1))
            if inside == 0:
                raise ValueError("importance density has no mass inside the prior support")
            self.log_mass = math.log(inside)

    @classmethod
    def fit(cls, draws, family="normal", eta=5.0, support=None, ridge=0.0):
        draws = np.asarray(draws, dtype=float)
        if draws.ndim == 1:
            draws = draws[:, None]
        cov = np.atleast_2d(np.cov(draws, rowvar=False))
        if ridge:
            cov = cov + ridge * np.diag(np.diag(cov))
        return cls(draws.mean(axis=0), cov, family, eta, support)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        out = np.atleast_1d(self._dist.logpdf(x)) - self.log_mass
        if self.support is not None:
            lo, hi = self.support
            out = np.where(np.all((x > lo) & (x < hi), axis=1), out, -np.inf)
        return out


def _chain_loglik(chain, loglik):
    if loglik is None:
        return chain.log_lik
    return np.array([loglik(th) for th in chain.draws])


def rise_log_evidence(chain, loglik=None, prior=None, density=None, family="normal",
                      mode="rise"):
    """Log marginal likelihood by reciprocal importance sampling.

    ``log p(y) = -log( mean_t h(theta_t) / (L(theta_t) pi(theta_t)) )``,
    evaluated with log-sum-exp. ``mode="harmonic"`` takes ``h`` equal to the
    prior, which gives the harmonic-mean estimator.

    Parameters
    ----------
    chain : PosteriorSample
    loglik : callable, optional
        Re-evaluates the log-likelihood of each draw; by default the values
        stored with the chain are used.
    prior : PriorSpec, optional
        Defaults to the chain's prior.
    density : ImportanceDensity, optional
        Fitted to the chain (truncated to the prior box) when omitted.
    """
    if chain.n_draws == 0:
        raise ValueError("empty chain")
    prior = prior or chain.prior
    ll = _chain_loglik(chain, loglik)
    log_prior = -chain.n_params * math.log(prior.upper - prior.lower)
    if mode == "harmonic":
        log_h = np.full(ll.size, log_prior)
    elif mode == "rise":
        if density is None:
            density = ImportanceDensity.fit(chain.draws, family,
                                            support=(prior.lower, prior.upper))
        log_h = density.logpdf(chain.draws)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    terms = log_h - ll - log_prior
    return float(-(logsumexp(terms) - math.log(ll.size)))


@dataclass(frozen=True)
class DicResult:
    dic: float
    p_eff: float
    mean_deviance: float
    deviance_at_mean: float

    def __iter__(self):
        return iter((self.dic, self.p_eff))


def dic(chain, loglik, stored=True):
    """Deviance information criterion with deviance ``-2 log L``.

    ``loglik`` is evaluated at the posterior mean; per-draw values come from
    the chain unless ``stored`` is False.
    """
    if chain.n_draws == 0:
        raise ValueError("empty chain")
    ll = chain.log_lik if stored else _chain_loglik(chain, loglik)
    mean_theta = chain.draws.mean(axis=0)
    assert chain.prior.contains(mean_theta), "posterior mean outside the prior box"
    d_bar = -2.0 * float(np.mean(ll))
    d_hat = -2.0 * float(loglik(mean_theta))
    return DicResult(2.0 * d_bar - d_hat, d_bar - d_hat, d_bar, d_hat)


def posterior_model_probs(logliks):
    """Posterior model probabilities under equal model and flat parameter priors.

    ``logliks`` is a sequence of per-sweep log-likelihood arrays, one per
    model (or chains carrying ``log_lik``). All are truncated to the shortest
    length ``N`` (keeping the final sweeps). At each sweep the likelihoods
    are normalized across models; the probabilities are the averages over
    sweeps, so they sum to one.
    """
    arrays = [np.asarray(getattr(x, "log_lik", x), dtype=float) for x in logliks]
    if not arrays:
        raise ValueError("no models given")
    n = min(a.size for a in arrays)
    if n == 0:
        raise ValueError("empty log-likelihood sequence")
    mat = np.vstack([a[a.size - n:] for a in arrays])
    if mat.shape[1] != n:
        raise ValueError("log-likelihood length mismatch after truncation")
    log_w = mat - logsumexp(mat, axis=0)
    probs = np.exp(log_w).mean(axis=1)
    return probs / probs.sum()


def lr_test(loglik_null, loglik_alt, df):
    """Likelihood-ratio statistic and chi-square p-value for nested models."""
    if df < 1:
        raise ValueError("df must be >= 1 for nested models")
    if loglik_alt < loglik_null - 1e-6:
        logger.warning("alternative log-likelihood %.6g below null %.6g; statistic clamped",
                       loglik_alt, loglik_null)
    stat = max(0.0, -2.0 * (loglik_null - loglik_alt))
    return stat, float(stats.chi2.sf(stat, df))


# ---------------------------------------------------------------------------
# full workflow


@dataclass
class ModelScore:
    model_id: str
    config: GroupConfig
    status: str = "ok"
    error: str = ""
    mle_dof: np.ndarray = None
    mle_loglik: float = math.nan
    lr_stat: float = math.nan
    lr_df: int = 0
    lr_pvalue: float = math.nan
    post_mean: np.ndarray = None
    post_se: np.ndarray = None
    loglik_at_mean: float = math.nan
    map: np.ndarray = None
    mmse: np.ndarray = None
    map_loglik: float = math.nan
    tau_hat: np.ndarray = None
    acceptance: np.ndarray = None
    log_rise: float = math.nan
    log_bf: float = math.nan
    dic_raw: float = math.nan
    dic: float = math.nan
    p_eff: float = math.nan
    post_prob: float = math.nan
    post_prob_excl_best: float = math.nan

    def as_dict(self, names=None):
        out = {}
        for key, val in self.__dict__.items():
            if key == "config":
                out["groups"] = self.config.label(names)
                out["group_of"] = list(self.config.group_of)
            elif isinstance(val, np.ndarray):
                out[key] = [float(v) for v in val]
            elif isinstance(val, float) and not math.isfinite(val):
                out[key] = None
            else:
                out[key] = val
        return out


@dataclass
class SelectionReport:
    scores: list
    names: list = None

    @property
    def ok(self):
        return [s for s in self.scores if s.status == "ok"]

    def ranking(self, criterion):
        """Model ids, best first, by ``log_rise``, ``dic``, ``post_prob`` or ``mle_loglik``."""
        sign = {"log_rise": -1, "dic": 1, "post_prob": -1, "mle_loglik": -1}[criterion]
        return [s.model_id for s in sorted(self.ok, key=lambda s: sign * getattr(s, criterion))]

    def to_dict(self):
        return {
            "models": [s.as_dict(self.names) for s in self.scores],
            "ranking": {c: self.ranking(c) for c in ("log_rise", "dic", "post_prob", "mle_loglik")},
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_delimited(self, path, delimiter=","):
        cols = ["model_id", "groups", "status", "mle_loglik", "lr_stat", "lr_df", "lr_pvalue",
                "loglik_at_mean", "map_loglik", "log_rise", "log_bf", "dic", "p_eff",
                "post_prob", "post_prob_excl_best", "post_mean", "post_se", "map", "mle_dof"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, delimiter=delimiter)
            writer.writerow(cols)
            for s in self.scores:
                d = s.as_dict(self.names)
                row = []
                for c in cols:
                    v = d.get(c)
                    if isinstance(v, list):
                        v = " ".join(f"{x:.6g}" for x in v)
                    elif isinstance(v, float):
                        v = repr(v)
                    row.append("" if v is None else v)
                writer.writerow(row)


def model_seeds(seed, n_models):
    """Independent integer seeds, one per model, from ``SeedSequence(seed)``."""
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(n_models)]


def fit_model(sample, config, corr, prior, chain_cfg, rel_tol=1e-9):
    """Maximum likelihood fit and MCMC chain of one model."""
    mle = mle_fit(sample, config, corr, rel_tol=rel_tol)
    chain = run_chain(sample, config, corr, prior, chain_cfg, rel_tol=rel_tol)
    return mle, chain


def score_model(model_id, sample, config, corr, mle, chain, rel_tol=1e-9, family="normal"):
    """Per-model summaries that need no other model."""
    score = ModelScore(model_id, config)
    score.mle_dof = config.collapse(mle.dof.values)
    score.mle_loglik = mle.loglik
    ws = DensityWorkspace()

    def loglik(theta):
        return log_likelihood(sample, config, config.expand(theta), corr, ws, rel_tol=rel_tol)

    diag = diagnostics(chain, Q=min(50, chain.n_draws // 2))
    score.tau_hat = diag.tau_hat
    score.post_mean = diag.mean
    score.post_se = diag.batch_se
    score.acceptance = chain.acceptance_rate
    score.map, score.mmse = point_estimates(chain)
    score.map_loglik = float(chain.log_lik.max())
    d = dic(chain, loglik)
    score.dic_raw, score.p_eff = d.dic, d.p_eff
    score.loglik_at_mean = -0.5 * d.deviance_at_mean
    score.log_rise = rise_log_evidence(chain, family=family)
    return score


def _score_job(job):
    """Fit (or fetch) and score one model; failures are returned, not raised."""
    h, config, u, corr, prior, chain_cfg, rel_tol, family, fetch, store = job
    try:
        sample = PseudoSample(u)
        cached = fetch(h, config) if fetch else None
        if cached is None:
            mle, chain = fit_model(sample, config, corr, prior, chain_cfg, rel_tol)
            if store:
                store(h, config, mle, chain)
        else:
            mle, chain = cached
        return score_model(f"M{h}", sample, config, corr, mle, chain, rel_tol, family), \
            chain.log_lik
    except Exception as exc:  # noqa: BLE001 - isolate per-model failures
        logger.exception("model M%d failed", h)
        score = ModelScore(f"M{h}", config, status="failed",
                           error=f"{type(exc).__name__}: {exc}")
        return score, None


def run_selection(sample, family, corr, prior=None, chain_cfg=None, seed=0, rel_tol=1e-9,
                  importance="normal", names=None, n_jobs=1, fetch=None, store=None):
    """Fit every model of ``family`` and rank them.

    For each model: maximum likelihood fit, MCMC chain, diagnostics, RISE
    evidence, DIC and a likelihood-ratio test against the first model of the
    family (the generalized model). Posterior model probabilities are then
    computed jointly. A model whose pipeline raises is reported with
    ``status="failed"`` and excluded from the joint quantities.

    Model ``h`` samples with seed ``model_seeds(seed, len(family))[h]``.
    ``fetch(h, config)`` may return a cached ``(MleResult, PosteriorSample)``
    and ``store(h, config, mle, chain)`` persists fresh fits.
    """
    if not isinstance(sample, PseudoSample):
        sample = PseudoSample(sample)
    prior = prior or PriorSpec()
    chain_cfg = chain_cfg or ChainConfig()
    seeds = model_seeds(seed, len(family))
    jobs = []
    for h, cfg in enumerate(family):
        ccfg = ChainConfig(chain_cfg.n_tune, chain_cfg.n_burn, chain_cfg.n_sample, seeds[h],
                           chain_cfg.tune_window)
        jobs.append((h, cfg, sample.u, corr, prior, ccfg, rel_tol, importance, fetch, store))
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_score_job, jobs))
    else:
        results = []
        for job in jobs:
            logger.info("model M%d: %s", job[0], job[1].label(names))
            results.append(_score_job(job))
    scores = [r[0] for r in results]

    base = scores[0]
    if base.status == "ok" and base.config == GroupConfig.generalized(base.config.dim):
        # every nested optimum is attainable by the first model, so an
        # optimizer shortfall there is repaired with the best nested point
        for s in scores[1:]:
            if s.status == "ok" and s.mle_loglik > base.mle_loglik:
                logger.info("raising %s optimum to that of %s", base.model_id, s.model_id)
                base.mle_loglik = s.mle_loglik
                base.mle_dof = base.config.collapse(s.config.expand(s.mle_dof))
        for s in scores[1:]:
            if s.status != "ok":
                continue
            s.lr_df = base.config.n_groups - s.config.n_groups
            if s.lr_df >= 1:
                s.lr_stat, s.lr_pvalue = lr_test(s.mle_loglik, base.mle_loglik, s.lr_df)

    ok = [i for i, s in enumerate(scores) if s.status == "ok"]
    if ok:
        best_rise = max(scores[i].log_rise for i in ok)
        best_dic = min(scores[i].dic_raw for i in ok)
        probs = posterior_model_probs([results[i][1] for i in ok])
        for i, p in zip(ok, probs):
            s = scores[i]
            s.log_bf = best_rise - s.log_rise
            s.dic = s.dic_raw - best_dic
            s.post_prob = float(p)
        if len(ok) > 1:
            top = ok[int(np.argmax(probs))]
            rest = [i for i in ok if i != top]
            excl = posterior_model_probs([results[i][1] for i in rest])
            for i, p in zip(rest, excl):
                scores[i].post_prob_excl_best = float(p)
    return SelectionReport(scores, names)
