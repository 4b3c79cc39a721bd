"""Grouped and generalized t-copulas: likelihood, Bayesian model choice and CVaR.

Typical use::

    from gtcopula import (GroupConfig, CorrelationMatrix, DofVector, simulate,
                          mle_fit, run_chain, enumerate_models, run_selection)
"""

from .copula import (CorrelationMatrix, DensityWorkspace, DofVector, GroupConfig, MleResult,
                     PseudoSample, log_density, log_likelihood, mle_fit, simulate,
                     standard_t_log_density)
from .data import (CsvSchema, GarchParams, garch_filter, garch_fit, ingest_csv, kendall_corr,
                   log_returns, to_pseudo_obs)
from .mcmc import (ChainConfig, PosteriorSample, PriorSpec, ProposalSpec, diagnostics,
                   load_chain, point_estimates, run_chain, sample_chain, save_chain)
from .quadrature import ConvergenceError, integrate_adaptive
from .risk import Portfolio, compare_models, cvar_from_losses, cvar_mc, portfolio_loss
from .selection import (ImportanceDensity, ModelFamily, dic, enumerate_models, lr_test,
                        posterior_model_probs, rise_log_evidence, run_selection)

__version__ = "0.1.0"
