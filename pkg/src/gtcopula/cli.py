"""Command-line front end: ``gtcopula <command> --config run.ini``.

Commands
--------
filter     GARCH-filter a price file into residuals, pseudo-observations and
           a Kendall-tau correlation matrix.
simulate   Write synthetic pseudo-observations from a chosen model instead.
calibrate  MLE and MCMC for one model of the family.
select     Fit and rank the whole family.
cvar       Compare the CVaR of two fitted models on the configured portfolios.
report     Render the selection results as fixed-precision tables.

Every command writes into the output directory and refreshes its
``MANIFEST`` (sha256 digest of each artifact). Exit codes: 0 success,
2 invalid configuration or arguments, 3 data problems, 4 numerical
non-convergence, 5 some models of the family failed.
"""

import argparse
import configparser
from dataclasses import dataclass, field
import hashlib
import json
import logging
import math
from pathlib import Path
import sys

import numpy as np

from .copula import CorrelationMatrix, DofVector, MleResult, PseudoSample, simulate
from .data import (CsvSchema, GarchFitError, csv_header, ResidualMatrix, garch_filter, garch_fit,
                   ingest_csv, kendall_corr, log_returns, read_matrix, to_pseudo_obs,
                   write_matrix)
from .mcmc import ChainConfig, PriorSpec, diagnostics, load_chain, save_chain
from .quadrature import ConvergenceError
from .risk import compare_models, cvar_from_losses, read_portfolio, write_comparisons
from .selection import (enumerate_models, fit_model, model_seeds, run_selection,
                        score_model)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4
EXIT_PARTIAL = 5

logger = logging.getLogger("gtcopula")


class ValidationError(Exception):
    pass


class DataError(Exception):
    pass


class PartialFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    out_dir: Path
    seed: int
    chain: ChainConfig
    prior: PriorSpec = field(default_factory=PriorSpec)
    data_path: Path = None
    schema: CsvSchema = field(default_factory=CsvSchema)
    policy: str = "two-group"
    importance: str = "normal"
    n_jobs: int = 1
    rel_tol: float = 1e-9
    portfolios: list = field(default_factory=list)
    alphas: tuple = (0.99,)
    n_sims: int = 1_000_000
    risk_seed: int = 0
    models: tuple = ()
    estimate: str = "map"
    linear_loss: bool = False
    parser: configparser.ConfigParser = None


KNOWN_KEYS = {
    "data": {"path", "date_column", "columns", "invert", "date_format"},
    "prior": {"lower", "upper"},
    "chain": {"seed", "n_tune", "n_burn", "n_sample", "tune_window"},
    "selection": {"policy", "importance", "n_jobs"},
    "quadrature": {"rel_tol"},
    "output": {"dir"},
    "risk": {"portfolios", "alpha", "n_sims", "seed", "estimate", "linear_loss", "models"},
}


def _split(text):
    return tuple(s.strip() for s in text.replace(";", ",").split(",") if s.strip())


def load_config(path, seed=None, out_dir=None):
    """Parse and validate a run configuration; every problem is reported at once."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file {path} not found")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ValidationError(f"{path}: {exc}") from None
    base = path.parent
    errors = []

    def get(section, key, conv=str, default=None, required=False):
        if not cp.has_option(section, key) or cp.get(section, key).strip() == "":
            if required:
                errors.append(f"[{section}] {key} is required")
            return default
        raw = cp.get(section, key).strip()
        try:
            return conv(raw)
        except ValueError:
            errors.append(f"[{section}] {key} = {raw!r} is not valid")
            return default

    for sec in cp.sections():
        if sec not in KNOWN_KEYS:
            errors.append(f"unknown section [{sec}]")
            continue
        for key in cp[sec]:
            if key not in KNOWN_KEYS[sec]:
                errors.append(f"unknown key [{sec}] {key}")

    cfg_seed = get("chain", "seed", int, required=seed is None)
    chain = None
    n_tune = get("chain", "n_tune", int, 10_000)
    n_burn = get("chain", "n_burn", int, 20_000)
    n_sample = get("chain", "n_sample", int, 100_000)
    window = get("chain", "tune_window", int, 100)
    s = seed if seed is not None else cfg_seed
    try:
        chain = ChainConfig(n_tune, n_burn, n_sample, s, window)
    except (ValueError, TypeError) as exc:
        errors.append(f"[chain] {exc}")
    prior = None
    try:
        prior = PriorSpec(get("prior", "lower", float, 1.0), get("prior", "upper", float, 100.0))
        if prior.lower < 0:
            errors.append("[prior] lower must be >= 0")
    except ValueError as exc:
        errors.append(f"[prior] {exc}")

    data_path = get("data", "path")
    if data_path is not None:
        data_path = (base / data_path).resolve()
        if not data_path.is_file():
            errors.append(f"[data] path {data_path} does not exist")
    schema = CsvSchema(
        date_column=get("data", "date_column", str, "date"),
        columns=get("data", "columns", _split, None),
        invert=get("data", "invert", _split, ()),
        date_format=get("data", "date_format", str, None),
    )
    if data_path is not None and data_path.is_file():
        header, _ = csv_header(data_path)
        wanted = [schema.date_column, *(schema.columns or ())]
        absent = [c for c in wanted if c not in header]
        if absent:
            errors.append(f"[data] columns {absent} not in the header of {data_path.name}")
    if schema.columns and schema.invert:
        bad = [c for c in schema.invert if c not in schema.columns]
        if bad:
            errors.append(f"[data] invert lists {bad} which are not in columns")

    policy = get("selection", "policy", str, "two-group")
    if policy not in ("two-group", "all"):
        errors.append(f"[selection] policy must be two-group or all, got {policy!r}")
    importance = get("selection", "importance", str, "normal")
    if importance not in ("normal", "t"):
        errors.append(f"[selection] importance must be normal or t, got {importance!r}")
    n_jobs = get("selection", "n_jobs", int, 1)
    rel_tol = get("quadrature", "rel_tol", float, 1e-9)
    if rel_tol is not None and not 0 < rel_tol < 1e-2:
        errors.append("[quadrature] rel_tol must lie in (0, 1e-2)")

    out = out_dir or get("output", "dir", str, "out")
    out = (base / out).resolve() if out_dir is None else Path(out_dir).resolve()

    portfolios = []
    for p in get("risk", "portfolios", _split, ()):
        pp = (base / p).resolve()
        if not pp.is_file():
            errors.append(f"[risk] portfolio file {pp} does not exist")
        portfolios.append(pp)
    alphas = get("risk", "alpha", lambda t: tuple(float(a) for a in _split(t)), (0.99,))
    if any(not 0.5 < a < 1 for a in alphas):
        errors.append("[risk] alpha values must lie in (0.5, 1)")
    n_sims = get("risk", "n_sims", int, 1_000_000)
    if n_sims is not None and n_sims < 10_000:
        errors.append("[risk] n_sims must be at least 10000")
    risk_seed = get("risk", "seed", int)
    estimate = get("risk", "estimate", str, "map")
    if estimate not in ("map", "mmse", "mle"):
        errors.append(f"[risk] estimate must be map, mmse or mle, got {estimate!r}")
    linear = get("risk", "linear_loss", _bool, False)
    models = get("risk", "models", _split, ())

    if errors:
        raise ValidationError("invalid configuration:\n  " + "\n  ".join(errors))
    return RunConfig(out, chain.seed, chain, prior, data_path, schema, policy, importance,
                     n_jobs, rel_tol, portfolios, alphas, n_sims,
                     chain.seed if risk_seed is None or seed is not None else risk_seed,
                     models, estimate, linear, cp)


def _bool(text):
    states = configparser.ConfigParser.BOOLEAN_STATES
    if text.lower() not in states:
        raise ValueError(text)
    return states[text.lower()]


# ---------------------------------------------------------------------------
# helpers


def write_manifest(out_dir):
    out_dir = Path(out_dir)
    lines = []
    for f in sorted(p for p in out_dir.rglob("*") if p.is_file() and p.name != "MANIFEST"):
        digest = hashlib.sha256(f.read_bytes()).hexdigest()
        lines.append(f"{digest}  {f.relative_to(out_dir).as_posix()}")
    (out_dir / "MANIFEST").write_text("\n".join(lines) + "\n")


def _save_effective_config(cfg):
    cp = configparser.ConfigParser()
    cp.read_dict(cfg.parser)
    if not cp.has_section("chain"):
        cp.add_section("chain")
    cp.set("chain", "seed", str(cfg.seed))
    with open(cfg.out_dir / "config.ini", "w") as fh:
        cp.write(fh)


def _load_inputs(cfg):
    po = cfg.out_dir / "pseudo_obs.csv"
    cm = cfg.out_dir / "corr.csv"
    if not (po.is_file() and cm.is_file()):
        raise DataError(f"{po.name} / {cm.name} not found in {cfg.out_dir}; "
                        "run `gtcopula filter` or `gtcopula simulate` first")
    names, u = read_matrix(po)
    _, sigma = read_matrix(cm)
    try:
        return PseudoSample(u, names), CorrelationMatrix(sigma), names
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _input_digest(cfg):
    h = hashlib.sha256()
    for name in ("pseudo_obs.csv", "corr.csv"):
        h.update((cfg.out_dir / name).read_bytes())
    return h.hexdigest()


def _chain_digest(cfg, config, seed):
    c = cfg.chain
    key = (_input_digest(cfg), config.group_of, c.n_tune, c.n_burn, c.n_sample, c.tune_window,
           seed, cfg.prior.lower, cfg.prior.upper, cfg.rel_tol)
    return hashlib.sha256(repr(key).encode()).hexdigest()


def _family_and_index(cfg, dim, model_id):
    family = enumerate_models(dim, cfg.policy)
    ids = family.ids
    if model_id not in ids:
        shown = ", ".join(ids if len(ids) <= 40 else ids[:40] + ["..."])
        raise ValidationError(f"unknown model id {model_id!r}; valid ids: {shown}")
    return family, ids.index(model_id)


class ChainCache:
    """Chains and MLE results under ``out/chains`` keyed by an input digest."""

    def __init__(self, cfg, family, seeds):
        self.cfg = cfg
        self.dir = cfg.out_dir / "chains"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.family = family
        self.seeds = seeds
        self.hits = 0

    def path(self, h):
        return self.dir / f"M{h}.csv"

    def fetch(self, h, config):
        p = self.path(h)
        if not (p.is_file() and Path(str(p) + ".meta").is_file()):
            return None
        chain, meta = load_chain(p)
        if meta.get("digest") != _chain_digest(self.cfg, config, self.seeds[h]):
            logger.info("cache stale for M%d; recomputing", h)
            return None
        logger.info("cache hit for M%d", h)
        self.hits += 1
        dof = DofVector.for_groups(config, [float(x) for x in meta["mle_dof"].split()],
                                   self.cfg.prior.lower, self.cfg.prior.upper)
        mle = MleResult(dof, float(meta["mle_loglik"]), meta["mle_converged"] == "True", 0,
                        "cached")
        chain.model_id = config
        return mle, chain

    def store(self, h, config, mle, chain):
        meta = {
            "model": f"M{h}",
            "digest": _chain_digest(self.cfg, config, self.seeds[h]),
            "mle_dof": " ".join(repr(float(v)) for v in config.collapse(mle.dof.values)),
            "mle_loglik": repr(float(mle.loglik)),
            "mle_converged": str(bool(mle.converged)),
        }
        save_chain(chain, self.path(h), meta)


def _write_fit(cfg, score, names, diag=None):
    d = score.as_dict(names)
    if diag is not None:
        d["ess"] = [float(x) for x in diag.ess]
        d["g_max"] = [int(x) for x in diag.g_max]
    fits = cfg.out_dir / "fits"
    fits.mkdir(exist_ok=True)
    with open(fits / f"{score.model_id}.json", "w") as fh:
        json.dump(d, fh, indent=2)


# ---------------------------------------------------------------------------
# commands


def cmd_filter(cfg, args):
    if cfg.data_path is None:
        raise ValidationError("[data] path is required for filter")
    try:
        ingest = ingest_csv(cfg.data_path, cfg.schema)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    names = ingest.labels
    rows, eps = [], []
    for s in ingest.series:
        try:
            r = log_returns(s)
            params = garch_fit(r)
        except ValueError as exc:
            raise DataError(f"{s.label}: {exc}") from None
        except GarchFitError as exc:
            raise ConvergenceError(f"{s.label}: {exc}") from None
        se = params.std_errors
        rows.append([s.label, *params.as_row(), se.get("mu", math.nan), se.get("omega", math.nan),
                     se.get("alpha", math.nan), se.get("beta", math.nan), int(params.converged)])
        eps.append(garch_filter(r, params))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_matrix(cfg.out_dir / "garch.csv", rows,
                 ["asset", "mu", "omega", "alpha", "beta", "sigma0_sq", "loglik", "se_mu",
                  "se_omega", "se_alpha", "se_beta", "converged"])
    resid = ResidualMatrix(np.column_stack(eps), names)
    if not resid.variance_ok():
        logger.warning("some residual variances fall outside [0.5, 2]")
    write_matrix(cfg.out_dir / "residuals.csv", resid.eps, names)
    sample = to_pseudo_obs(resid)
    write_matrix(cfg.out_dir / "pseudo_obs.csv", sample.u, names)
    write_matrix(cfg.out_dir / "corr.csv", kendall_corr(sample).matrix, names)
    logger.info("filtered %d assets, %d observations (%d rows dropped)", len(names),
                sample.n_obs, ingest.n_dropped)
    return EXIT_OK


def cmd_simulate(cfg, args):
    if args.corr:
        _, sigma = read_matrix(args.corr)
        corr = CorrelationMatrix(sigma)
    else:
        if args.dim is None:
            raise ValidationError("simulate needs --dim with --rho, or --corr")
        corr = CorrelationMatrix.equicorrelated(args.dim, args.rho)
    family, h = _family_and_index(cfg, corr.dim, args.model)
    config = family[h]
    if len(args.dof) != config.n_groups:
        raise ValidationError(f"{args.model} has {config.n_groups} groups; "
                              f"--dof gave {len(args.dof)} values")
    try:
        dof = DofVector.for_groups(config, args.dof, cfg.prior.lower, cfg.prior.upper)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    sample = simulate(config, dof, corr, args.n_obs, cfg.seed)
    names = [f"X{i + 1}" for i in range(corr.dim)]
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_matrix(cfg.out_dir / "pseudo_obs.csv", sample.u, names)
    write_matrix(cfg.out_dir / "corr.csv", corr.matrix, names)
    logger.info("simulated %d draws from %s %s", args.n_obs, args.model, config.label(names))
    return EXIT_OK


def cmd_calibrate(cfg, args):
    sample, corr, names = _load_inputs(cfg)
    family, h = _family_and_index(cfg, sample.dim, args.model)
    config = family[h]
    seeds = model_seeds(cfg.seed, len(family))
    cache = ChainCache(cfg, family, seeds)
    chain_cfg = ChainConfig(cfg.chain.n_tune, cfg.chain.n_burn, cfg.chain.n_sample, seeds[h],
                            cfg.chain.tune_window)
    cached = cache.fetch(h, config)
    if cached is None:
        mle, chain = fit_model(sample, config, corr, cfg.prior, chain_cfg, cfg.rel_tol)
        cache.store(h, config, mle, chain)
    else:
        mle, chain = cached
    score = score_model(args.model, sample, config, corr, mle, chain, cfg.rel_tol, cfg.importance)
    diag = diagnostics(chain, Q=min(50, chain.n_draws // 2))
    _write_fit(cfg, score, names, diag)
    write_matrix(cfg.out_dir / "fits" / f"{args.model}_diagnostics.csv",
                 np.column_stack([np.arange(1, config.n_groups + 1), diag.mean, diag.sd,
                                  diag.batch_se, diag.tau_hat, diag.g_max, diag.ess]),
                 ["group", "mean", "sd", "batch_se", "tau_hat", "g_max", "ess"])
    logger.info("%s: MLE %s (loglik %.4f), MMSE %s +- %s", args.model,
                np.round(score.mle_dof, 3), score.mle_loglik, np.round(score.mmse, 3),
                np.round(score.post_se, 3))
    return EXIT_OK


def cmd_select(cfg, args):
    sample, corr, names = _load_inputs(cfg)
    family = enumerate_models(sample.dim, cfg.policy)
    seeds = model_seeds(cfg.seed, len(family))
    cache = ChainCache(cfg, family, seeds)
    report = run_selection(sample, family, corr, cfg.prior, cfg.chain, cfg.seed, cfg.rel_tol,
                           cfg.importance, names, cfg.n_jobs, cache.fetch, cache.store)
    for s in report.ok:
        _write_fit(cfg, s, names)
    report.write_json(cfg.out_dir / "selection.json")
    report.write_delimited(cfg.out_dir / "selection.csv")
    (cfg.out_dir / "report.txt").write_text(render_report(report.to_dict()))
    failed = [s.model_id for s in report.scores if s.status != "ok"]
    logger.info("selection done: %d models, %d cache hits, best by probability %s",
                len(family), cache.hits, report.ranking("post_prob")[:1])
    if failed:
        raise PartialFailure(f"models failed: {', '.join(failed)}")
    return EXIT_OK


def _fitted_model(cfg, model_id, dim, estimate):
    family, h = _family_and_index(cfg, dim, model_id)
    path = cfg.out_dir / "fits" / f"{model_id}.json"
    if not path.is_file():
        raise DataError(f"no fit for {model_id}; run `gtcopula calibrate --model {model_id}` "
                        "(or `gtcopula select`) first")
    with open(path) as fh:
        fit = json.load(fh)
    key = {"map": "map", "mmse": "mmse", "mle": "mle_dof"}[estimate]
    config = family[h]
    return config, DofVector.for_groups(config, fit[key], cfg.prior.lower, cfg.prior.upper)


def cmd_cvar(cfg, args):
    if args.self_test:
        rng = np.random.default_rng(cfg.risk_seed)
        lines = ["alpha,cvar,std_error,expected"]
        for a in cfg.alphas:
            est = cvar_from_losses(rng.random(cfg.n_sims), a)
            lines.append(f"{a!r},{est.cvar!r},{est.std_error!r},{(1 + a) / 2!r}")
            print(f"uniform-loss self-test alpha={a}: CVaR {est.cvar:.6f} "
                  f"(expected {(1 + a) / 2:.6f}, se {est.std_error:.2g})")
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        (cfg.out_dir / "cvar_selftest.csv").write_text("\n".join(lines) + "\n")
        return EXIT_OK
    models = [args.model_a, args.model_b]
    models = [m or (cfg.models[i] if len(cfg.models) > i else None) for i, m in enumerate(models)]
    if None in models:
        raise ValidationError("cvar needs --model-a and --model-b (or [risk] models)")
    if not cfg.portfolios:
        raise ValidationError("[risk] portfolios lists no portfolio files")
    _, corr, names = _load_inputs(cfg)
    ma = _fitted_model(cfg, models[0], corr.dim, cfg.estimate)
    mb = _fitted_model(cfg, models[1], corr.dim, cfg.estimate)
    rows = []
    for path in cfg.portfolios:
        try:
            portfolio = read_portfolio(path)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        if len(portfolio) != corr.dim:
            raise DataError(f"{path.name}: {len(portfolio)} weights for {corr.dim} assets")
        for a in cfg.alphas:
            c = compare_models(ma, mb, corr, portfolio, a, cfg.n_sims, cfg.risk_seed,
                               cfg.linear_loss)
            rows.append((path.stem, models[0], models[1], c))
            print(f"{path.stem} alpha={a}: CVaR {models[0]} {c.a.cvar:.4g} ({c.a.std_error:.2g}) "
                  f"{models[1]} {c.b.cvar:.4g} ({c.b.std_error:.2g}) "
                  f"rel. diff {100 * c.rel_diff:.2f}% ({100 * c.rel_diff_se:.2f}%)")
    write_comparisons(cfg.out_dir / f"cvar_{models[0]}_{models[1]}.csv", rows)
    return EXIT_OK


def _g(v, digits=4):
    if v is None:
        return "-"
    if isinstance(v, list):
        return " ".join(_g(x, digits) for x in v)
    if isinstance(v, float):
        return f"{v:.{digits}g}"
    return str(v)


def render_report(doc):
    """Fixed-precision text tables from a selection document."""
    models = doc["models"]
    out = []
    out.append("Posterior summaries")
    out.append(f"{'model':<6} {'groups':<48} {'posterior mean (batch SE)':<40} loglik@mean")
    for m in models:
        if m["status"] != "ok":
            out.append(f"{m['model_id']:<6} {m['groups']:<48} FAILED: {m['error']}")
            continue
        pm = " ".join(f"{a:.3g}({b:.2g})" for a, b in zip(m["post_mean"], m["post_se"]))
        out.append(f"{m['model_id']:<6} {m['groups']:<48} {pm:<40} {_g(m['loglik_at_mean'], 6)}")
    out.append("")
    out.append("Maximum likelihood and likelihood-ratio tests against the first model")
    out.append(f"{'model':<6} {'MLE dof':<36} {'loglik':>10} {'LR stat':>8} {'df':>3} {'p-value':>9}")
    for m in models:
        if m["status"] != "ok":
            continue
        out.append(f"{m['model_id']:<6} {_g(m['mle_dof'], 3):<36} {_g(m['mle_loglik'], 6):>10} "
                   f"{_g(m['lr_stat'], 3):>8} {m['lr_df'] or '-':>3} {_g(m['lr_pvalue'], 2):>9}")
    out.append("")
    out.append("Bayesian model choice")
    out.append(f"{'model':<6} {'log BF vs best':>14} {'DIC':>8} {'p_eff':>6} "
               f"{'prob %':>8} {'prob % excl. best':>18}")
    for m in models:
        if m["status"] != "ok":
            continue
        pe = m["post_prob_excl_best"]
        out.append(f"{m['model_id']:<6} {_g(m['log_bf'], 4):>14} {_g(m['dic'], 4):>8} "
                   f"{_g(m['p_eff'], 3):>6} {100 * m['post_prob']:>8.3g} "
                   f"{'-' if pe is None else format(100 * pe, '.3g'):>18}")
    out.append("")
    for crit, order in doc["ranking"].items():
        out.append(f"ranking by {crit}: {' '.join(order[:10])}")
    return "\n".join(out) + "\n"


def cmd_report(cfg, args):
    path = cfg.out_dir / "selection.json"
    if not path.is_file():
        raise DataError(f"{path} not found; run `gtcopula select` first")
    with open(path) as fh:
        text = render_report(json.load(fh))
    (cfg.out_dir / "report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


COMMANDS = {
    "filter": cmd_filter,
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "select": cmd_select,
    "cvar": cmd_cvar,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="gtcopula", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", required=True, help="run configuration (INI)")
    common.add_argument("--seed", type=int, help="override the configured seeds")
    common.add_argument("-o", "--out", help="override the output directory")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("filter", parents=[common], help="GARCH filter and pseudo-observations")
    p = sub.add_parser("simulate", parents=[common], help="synthetic pseudo-observations")
    p.add_argument("--model", required=True, help="model id, e.g. M0")
    p.add_argument("--dof", type=float, nargs="+", required=True, help="one value per group")
    p.add_argument("--n-obs", type=int, default=1000)
    p.add_argument("--dim", type=int)
    p.add_argument("--rho", type=float, default=0.5, help="equicorrelation when no --corr")
    p.add_argument("--corr", help="correlation matrix file")
    p = sub.add_parser("calibrate", parents=[common], help="fit one model")
    p.add_argument("--model", required=True)
    sub.add_parser("select", parents=[common], help="fit and rank the model family")
    p = sub.add_parser("cvar", parents=[common], help="CVaR comparison of two models")
    p.add_argument("--model-a")
    p.add_argument("--model-b")
    p.add_argument("--self-test", action="store_true", help="uniform-loss check only")
    sub.add_parser("report", parents=[common], help="render saved selection results")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = None
    try:
        cfg = load_config(args.config, args.seed, args.out)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        _save_effective_config(cfg)
        code = COMMANDS[args.command](cfg, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        code = EXIT_DATA
    except (ConvergenceError, FloatingPointError) as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        code = EXIT_CONVERGENCE
    except PartialFailure as exc:
        print(f"partial failure: {exc}", file=sys.stderr)
        code = EXIT_PARTIAL
    if cfg is not None:
        write_manifest(cfg.out_dir)
    return code


if __name__ == "__main__":
    sys.exit(main())
