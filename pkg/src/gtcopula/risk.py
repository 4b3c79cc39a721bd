"""Monte Carlo VaR / CVaR of currency portfolios under a t-copula model.

Margins are standard normal so that differences between estimates isolate
the effect of the dependence structure.
"""

from dataclasses import dataclass
import csv
import hashlib
import logging
import math
import warnings

import numpy as np

from .copula import simulate
from .special import norm_quantile

__all__ = [
    "Portfolio",
    "CvarEstimate",
    "CvarComparison",
    "portfolio_loss",
    "cvar_from_losses",
    "cvar_mc",
    "compare_models",
    "read_portfolio",
    "write_comparisons",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Portfolio:
    """Dollar weights per asset; negative weights are short positions."""

    weights: tuple
    labels: tuple = None

    def __post_init__(self):
        w = tuple(float(x) for x in np.ravel(self.weights))
        if not w or not all(math.isfinite(x) for x in w):
            raise ValueError("portfolio weights must be finite and non-empty")
        object.__setattr__(self, "weights", w)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(w):
                raise ValueError("one label per weight required")
            object.__setattr__(self, "labels", labels)
        if abs(sum(w) - 1.0) > 1e-12:
            warnings.warn(f"portfolio weights sum to {sum(w):.15g}, not 1", stacklevel=2)

    @property
    def w(self):
        return np.array(self.weights)

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class CvarEstimate:
    alpha: float
    var: float
    cvar: float
    std_error: float
    n_sims: int
    n_exceed: int
    few_exceedances: bool = False


@dataclass(frozen=True)
class CvarComparison:
    a: CvarEstimate
    b: CvarEstimate
    rel_diff: float
    rel_diff_se: float


def portfolio_loss(x, weights, linear=False):
    """Portfolio loss for log-returns ``x`` (last axis indexes assets).

    The exact loss is ``sum_i w_i (1 - exp(x_i))``; ``linear=True`` uses the
    first-order form ``-sum_i w_i x_i``.
    """
    w = weights.w if isinstance(weights, Portfolio) else np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float)
    if linear:
        return -(x @ w)
    return -(np.expm1(x) @ w)


def cvar_from_losses(losses, alpha):
    """VaR and CVaR of a loss sample.

    VaR is the order statistic of rank ``ceil(alpha * n)``; CVaR is the mean
    of all losses at or above it, with standard error
    ``sd(exceedances) / sqrt(count)``.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    losses = np.asarray(losses, dtype=float).ravel()
    n = losses.size
    k = math.ceil(alpha * n)
    if not 1 <= k <= n:
        raise ValueError("too few losses for this alpha")
    var = float(np.partition(losses, k - 1)[k - 1])
    tail = losses[losses >= var]
    count = tail.size
    se = float(np.std(tail, ddof=1) / math.sqrt(count)) if count > 1 else math.nan
    few = count < 100
    if few:
        logger.warning("only %d exceedances at alpha=%g; CVaR unreliable", count, alpha)
    return CvarEstimate(alpha, var, float(tail.mean()), se, n, count, few)


def simulate_losses(config, dof, corr, portfolio, n_sims, seed, batch_size=1_000_000,
                    linear=False):
    """Loss sample of ``n_sims`` draws, simulated in batches with child seed streams."""
    if len(portfolio) != config.dim:
        raise ValueError("portfolio size does not match the copula dimension")
    n_batches = -(-n_sims // batch_size)
    streams = np.random.SeedSequence(seed).spawn(n_batches)
    out = np.empty(n_sims)
    start = 0
    for ss in streams:
        size = min(batch_size, n_sims - start)
        u = simulate(config, dof, corr, size, np.random.default_rng(ss)).u
        out[start:start + size] = portfolio_loss(norm_quantile(u), portfolio, linear)
        start += size
    return out


def cvar_mc(config, dof, corr, portfolio, alpha=0.99, n_sims=1_000_000, seed=0,
            linear=False, batch_size=1_000_000):
    """CVaR of ``portfolio`` with copula-dependent standard normal log-returns.

    Parameters
    ----------
    config : GroupConfig
    dof : DofVector
        Per-dimension degrees of freedom.
    corr : CorrelationMatrix
    portfolio : Portfolio
    alpha : float
        Quantile level in (0.5, 1).
    n_sims : int
        Number of scenarios, at least 10 000.
    seed : int
        Identical inputs and seed give bitwise-identical results.
    linear : bool
        Use the linearized loss.
    """
    if not 0.5 < alpha < 1:
        raise ValueError("alpha must lie in (0.5, 1)")
    if n_sims < 10_000:
        raise ValueError("n_sims must be at least 10000")
    losses = simulate_losses(config, dof, corr, portfolio, n_sims, seed, batch_size, linear)
    return cvar_from_losses(losses, alpha)


def _model_key(config, dof):
    h = hashlib.sha256(repr((config.group_of, tuple(np.round(dof.values, 12)))).encode())
    return int.from_bytes(h.digest()[:4], "little")


def compare_models(model_a, model_b, corr, portfolio, alpha=0.99, n_sims=1_000_000, seed=0,
                   linear=False):
    """Relative CVaR difference ``(CVaR_b - CVaR_a) / CVaR_a`` between two models.

    Each model is a ``(GroupConfig, DofVector)`` pair. Its random stream is
    derived from ``seed`` and a digest of the model, so distinct models get
    independent streams while the same model always reproduces itself.
    """
    ests = []
    for config, dof in (model_a, model_b):
        sub = [int(seed), _model_key(config, dof)]
        ests.append(cvar_mc(config, dof, corr, portfolio, alpha, n_sims, sub, linear))
    a, b = ests
    delta = (b.cvar - a.cvar) / a.cvar
    if model_a[0] == model_b[0] and np.array_equal(model_a[1].values, model_b[1].values):
        se = 0.0
    else:
        se = math.hypot(b.std_error / a.cvar, b.cvar * a.std_error / a.cvar ** 2)
    return CvarComparison(a, b, delta, se)


def read_portfolio(path):
    """Read ``label,weight`` rows (an optional header line is skipped)."""
    labels, weights = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            try:
                w = float(row[1])
            except (IndexError, ValueError):
                if not labels:
                    continue  # header
                raise ValueError(f"malformed portfolio row {row!r} in {path}") from None
            labels.append(row[0].strip())
            weights.append(w)
    return Portfolio(weights, labels)


def write_comparisons(path, rows, delimiter=","):
    """Write comparison rows ``(name, model_a, model_b, CvarComparison)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(["portfolio", "model_a", "model_b", "alpha", "cvar_a", "se_a", "cvar_b",
                    "se_b", "rel_diff", "rel_diff_se", "n_sims"])
        for name, ma, mb, c in rows:
            w.writerow([name, ma, mb, c.a.alpha, repr(c.a.cvar), repr(c.a.std_error),
                        repr(c.b.cvar), repr(c.b.std_error), repr(c.rel_diff),
                        repr(c.rel_diff_se), c.a.n_sims])
