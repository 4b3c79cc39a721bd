"""Standard, grouped and generalized (multi-dof) t-copulas.

The generalized copula has the stochastic representation

    X_i = W_i Z_i,  W_i = G_{nu_i}^{-1}(V),  U_i = t_{nu_i}(X_i)

with Z ~ N(0, Sigma) and a single V ~ U(0, 1). A grouped copula ties the
dof of all members of a group together; the standard copula has one group.
Its density needs a one-dimensional integral over the mixing level ``s``;
see :func:`log_density`.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import optimize
from scipy.special import gammaln, stdtr

from . import special
from .quadrature import ConvergenceError, NODES_PER_PANEL, kronrod_rule

__all__ = [
    "CorrelationMatrix",
    "DofVector",
    "GroupConfig",
    "PseudoSample",
    "DensityWorkspace",
    "MleResult",
    "simulate",
    "log_density",
    "log_density_terms",
    "standard_t_log_density",
    "log_likelihood",
    "mle_fit",
    "NU_MIN",
    "NU_MAX",
]

logger = logging.getLogger(__name__)

NU_MIN = 1.0
NU_MAX = 100.0

DEFAULT_REL_TOL = 1e-9
_LOG_2PI = np.log(2.0 * np.pi)
# The mixing level is written s = Phi(z) and the integral taken over the
# normal score z. Near s = 1 the integrand can carry its mass at 1 - s far
# below double resolution; in z that region is ordinary. Beyond |z| = 37 the
# tail probability is under 1e-299 and the integrand is negligible.
Z_MAX = 37.0
# starting panels in z; the peak moves right as the Mahalanobis distance grows
_INITIAL_BREAKS = np.array([
    -Z_MAX, -10.0, -6.0, -4.0, -2.5, -1.25, 0.0, 1.25, 2.5, 4.0, 5.5, 7.0, 8.5, 10.0,
    12.0, 14.5, 17.5, 22.0, 28.0, Z_MAX])


class CorrelationMatrix:
    """Positive-definite correlation matrix with cached factorizations."""

    def __init__(self, matrix):
        m = np.array(matrix, dtype=float)
        if m.ndim == 0:
            m = np.array([[1.0, float(m)], [float(m), 1.0]])
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("correlation matrix must be square")
        if not np.allclose(m, m.T, atol=1e-12, rtol=0):
            raise ValueError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(m), 1.0, atol=1e-12, rtol=0):
            raise ValueError("correlation matrix must have unit diagonal")
        off = m[~np.eye(m.shape[0], dtype=bool)]
        if np.any(np.abs(off) >= 1.0):
            raise ValueError("off-diagonal correlations must lie in (-1, 1)")
        m = 0.5 * (m + m.T)
        np.fill_diagonal(m, 1.0)
        try:
            chol = np.linalg.cholesky(m)
        except np.linalg.LinAlgError as exc:
            raise ValueError("correlation matrix is not positive definite") from exc
        self.matrix = m
        self.chol = chol
        self.log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        eye = np.eye(m.shape[0])
        linv = np.linalg.solve(chol, eye)
        self.precision = linv.T @ linv

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @classmethod
    def equicorrelated(cls, n, rho):
        m = np.full((n, n), float(rho))
        np.fill_diagonal(m, 1.0)
        return cls(m)

    def __eq__(self, other):
        return isinstance(other, CorrelationMatrix) and np.array_equal(self.matrix, other.matrix)

    def __repr__(self):
        return f"CorrelationMatrix(dim={self.dim})"


@dataclass(frozen=True)
class GroupConfig:
    """Partition of dimensions into groups sharing one dof parameter.

    ``group_of[i]`` is the group of dimension ``i``. The constructor
    canonicalizes labels so groups are numbered by their smallest member;
    two configurations that only swap group labels compare equal.
    """

    group_of: tuple

    def __post_init__(self):
        labels = tuple(int(g) for g in self.group_of)
        if not labels:
            raise ValueError("empty group configuration")
        remap = {}
        canon = []
        for g in labels:
            if g not in remap:
                remap[g] = len(remap)
            canon.append(remap[g])
        object.__setattr__(self, "group_of", tuple(canon))

    @classmethod
    def from_groups(cls, groups, n=None):
        """Build from a list of member lists, e.g. ``[[0, 2], [1, 3]]``."""
        members = [int(i) for grp in groups for i in grp]
        n = len(members) if n is None else n
        if sorted(members) != list(range(n)):
            raise ValueError("groups must partition range(n) exactly")
        group_of = [0] * n
        for k, grp in enumerate(groups):
            for i in grp:
                group_of[int(i)] = k
        return cls(tuple(group_of))

    @classmethod
    def standard(cls, n):
        return cls((0,) * n)

    @classmethod
    def generalized(cls, n):
        return cls(tuple(range(n)))

    @property
    def dim(self):
        return len(self.group_of)

    @property
    def n_groups(self):
        return max(self.group_of) + 1

    @property
    def groups(self):
        out = [[] for _ in range(self.n_groups)]
        for i, g in enumerate(self.group_of):
            out[g].append(i)
        return [tuple(grp) for grp in out]

    @property
    def shape(self):
        """Sorted group sizes, largest last, e.g. (1, 5)."""
        return tuple(sorted(len(g) for g in self.groups))

    def expand(self, group_values):
        """Per-dimension dof array from one value per group."""
        gv = np.asarray(group_values, dtype=float).reshape(-1)
        if gv.size != self.n_groups:
            raise ValueError(f"expected {self.n_groups} group values, got {gv.size}")
        return gv[np.asarray(self.group_of)]

    def collapse(self, values):
        """One value per group from a per-dimension array (first member)."""
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.size != self.dim:
            raise ValueError(f"expected {self.dim} values, got {v.size}")
        first = [grp[0] for grp in self.groups]
        return v[first]

    def label(self, names=None):
        names = names or [str(i + 1) for i in range(self.dim)]
        return ", ".join("(" + ", ".join(names[i] for i in grp) + ")" for grp in self.groups)

    def __str__(self):
        return self.label()


@dataclass(frozen=True)
class DofVector:
    """Per-dimension degrees of freedom with open bounds ``(lower, upper)``."""

    values: np.ndarray
    lower: float = NU_MIN
    upper: float = NU_MAX

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not self.lower < self.upper:
            raise ValueError("dof bounds must satisfy lower < upper")
        if np.any(~((v > self.lower) & (v < self.upper))):
            raise ValueError(
                f"dof values {v} outside the open interval ({self.lower}, {self.upper})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def for_groups(cls, config, group_values, lower=NU_MIN, upper=NU_MAX):
        return cls(config.expand(group_values), lower, upper)

    @property
    def dim(self):
        return self.values.size

    def shares_groups(self, config):
        return np.array_equal(config.expand(config.collapse(self.values)), self.values)

    def __eq__(self, other):
        return (isinstance(other, DofVector) and np.array_equal(self.values, other.values)
                and self.lower == other.lower and self.upper == other.upper)

    def __hash__(self):
        return hash((self.values.tobytes(), self.lower, self.upper))


@dataclass(frozen=True, eq=False)
class PseudoSample:
    """K x n pseudo-observations strictly inside the unit cube."""

    u: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.ndim == 1:
            u = u[None, :]
        if u.ndim != 2 or u.shape[0] == 0:
            raise ValueError("pseudo sample must be a non-empty K x n array")
        if np.any(~((u > 0) & (u < 1))):
            raise ValueError("pseudo-observations must lie strictly inside (0, 1)")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != u.shape[1]:
                raise ValueError("one label per column required")
            object.__setattr__(self, "labels", labels)

    @property
    def n_obs(self):
        return self.u.shape[0]

    @property
    def dim(self):
        return self.u.shape[1]

    def take(self, rows):
        return PseudoSample(self.u[rows], self.labels)


@dataclass
class DensityWorkspace:
    """Caches shared by repeated density evaluations on one sample.

    * t-quantiles ``x[:, i] = t_{nu_i}^{-1}(u[:, i])``: a column is
      recomputed only when its dof value changes, so one single-component
      MCMC update costs one column of quantiles.
    * reciprocal mixing quantiles ``1 / G_nu^{-1}(s)`` at the abscissae of
      each quadrature panel, for the ``max_dof_values`` most recently used
      dof values.
    """

    u: np.ndarray = None
    x: np.ndarray = None
    nu: np.ndarray = None
    recomputed_columns: int = 0
    max_dof_values: int = 16
    _u_id: int = field(default=None, repr=False)
    _mixing: OrderedDict = field(default_factory=OrderedDict, repr=False)

    def quantiles(self, u, nu):
        u = np.asarray(u)
        nu = np.asarray(nu, dtype=float)
        if self.u is None or self._u_id != id(u) or self.u.shape != u.shape \
                or not np.array_equal(self.u, u):
            self.u = u
            self._u_id = id(u)
            self.x = np.empty(u.shape, dtype=float)
            self.nu = np.full(u.shape[1], np.nan)
        stale = self.nu != nu
        for i in np.flatnonzero(stale):
            self.x[:, i] = special.t_quantile(u[:, i], nu[i])
            self.nu[i] = nu[i]
            self.recomputed_columns += 1
        return self.x

    def mixing_table(self, nu):
        """Panel -> reciprocal mixing quantiles for one dof value (LRU)."""
        nu = float(nu)
        table = self._mixing.get(nu)
        if table is None:
            table = self._mixing[nu] = {}
            while len(self._mixing) > self.max_dof_values:
                self._mixing.popitem(last=False)
        else:
            self._mixing.move_to_end(nu)
        return table


def _as_nu(dof, n):
    if isinstance(dof, DofVector):
        nu = dof.values
    else:
        nu = np.asarray(dof, dtype=float).reshape(-1)
        if nu.size == 1 and n > 1:
            nu = np.full(n, nu.item())
    if nu.size != n:
        raise ValueError(f"dof has {nu.size} entries, expected {n}")
    if np.any(~(nu > 0)):
        raise ValueError("dof must be positive")
    return nu


def _check_shapes(n, config=None, corr=None):
    if config is not None and config.dim != n:
        raise ValueError(f"group config has dimension {config.dim}, expected {n}")
    if corr is not None and corr.dim != n:
        raise ValueError(f"correlation matrix has dimension {corr.dim}, expected {n}")


# ---------------------------------------------------------------------------
# simulation


def simulate(config, dof, corr, n_draws, seed=None):
    """Draw ``n_draws`` pseudo-observations from the grouped t-copula.

    Members of a group share their dof value and their mixing variable
    ``W_k = G_{nu_k}^{-1}(V)``; all groups share ``V``.

    Parameters
    ----------
    config : GroupConfig
    dof : DofVector or array_like
        Per-dimension dof, constant within each group.
    corr : CorrelationMatrix
    n_draws : int
    seed : int or numpy.random.Generator

    Returns
    -------
    PseudoSample
    """
    n = config.dim
    _check_shapes(n, None, corr)
    nu = _as_nu(dof, n)
    group_nu = config.collapse(nu)
    if not np.array_equal(config.expand(group_nu), nu):
        raise ValueError("dof must be constant within each group")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((n_draws, n)) @ corr.chol.T
    v = rng.random(n_draws)
    v = np.where(v > 0, v, np.nextafter(0.0, 1.0))
    w = np.empty((n_draws, config.n_groups))
    for k, nu_k in enumerate(group_nu):
        w[:, k] = special.chi_w_quantile(v, nu_k)
    x = w[:, np.asarray(config.group_of)] * z
    # lower tail of |x| keeps precision near u = 1
    tail = stdtr(nu, -np.abs(x))
    u = np.where(x > 0, 1.0 - tail, tail)
    u = np.clip(u, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return PseudoSample(u)


# ---------------------------------------------------------------------------
# densities


def standard_t_log_density(u, nu, corr):
    """Closed-form log density of the standard t-copula.

    Accepts a single point of shape (n,) or a batch of shape (K, n).
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u2 = np.atleast_2d(u)
    n = u2.shape[1]
    _check_shapes(n, None, corr)
    if np.any(~((u2 > 0) & (u2 < 1))):
        raise ValueError("u must lie strictly inside (0, 1)")
    nu = float(np.asarray(nu).reshape(-1)[0]) if np.ndim(nu) else float(nu)
    if not nu > 0:
        raise ValueError("nu must be positive")
    x = special.t_quantile(u2, nu)
    quad = np.einsum("ki,ij,kj->k", x, corr.precision, x)
    log_joint = (gammaln(0.5 * (nu + n)) - gammaln(0.5 * nu)
                 - 0.5 * n * np.log(nu * np.pi) - 0.5 * corr.log_det
                 - 0.5 * (nu + n) * np.log1p(quad / nu))
    log_marg = special.t_logpdf(x, nu).sum(axis=1)
    out = log_joint - log_marg
    return float(out[0]) if single else out


class _MixingIntegrand:
    """Log of phi_Sigma(x / w) * prod_i w_i^{-1} * phi(z) for all rows of ``x``.

    Here ``w_i = G_{nu_i}^{-1}(Phi(z))``; the factor ``phi(z)`` is the
    Jacobian of ``s = Phi(z)``. Abscissae are always the Kronrod nodes of
    whole panels ``[lo, hi]`` in ``z``.
    """

    def __init__(self, x, nu, corr, ws=None):
        self.nu = nu
        self.n = x.shape[1]
        iu, ju = np.triu_indices(self.n)
        self.iu, self.ju = iu, ju
        self.coef = corr.precision[iu, ju] * np.where(iu == ju, 1.0, 2.0)
        self.xx = x[:, iu] * x[:, ju]
        self.const = -0.5 * self.n * _LOG_2PI - 0.5 * corr.log_det
        self.distinct, self.inverse = np.unique(nu, return_inverse=True)
        self.ws = ws
        self.nodes = kronrod_rule()[0]

    def _inv_w(self, lo, hi):
        """Reciprocal mixing quantiles, shape (n, panels, nodes)."""
        z = self._abscissae(lo, hi)
        out = np.empty((self.distinct.size,) + z.shape)
        for k, nu_k in enumerate(self.distinct):
            if self.ws is None:
                out[k] = special.chi_w_recip_at_score(z, nu_k)
                continue
            table = self.ws.mixing_table(nu_k)
            keys = list(zip(lo.tolist(), hi.tolist()))
            miss = [j for j, key in enumerate(keys) if key not in table]
            if miss:
                fresh = special.chi_w_recip_at_score(z[miss], nu_k)
                for j, vals in zip(miss, fresh):
                    table[keys[j]] = vals
            out[k] = np.stack([table[key] for key in keys])
        return out[self.inverse]

    def _abscissae(self, lo, hi):
        return (0.5 * (lo + hi))[:, None] + (0.5 * (hi - lo))[:, None] * self.nodes

    def _shared(self, lo, hi, inv_w):
        """Row-independent part: sum_i log(1 / w_i) + log phi(z)."""
        z = self._abscissae(lo, hi)
        return np.log(inv_w).sum(axis=0) - 0.5 * z * z - 0.5 * _LOG_2PI

    def log_values(self, lo, hi):
        """Values for every row on every panel; shape (K, panels, nodes)."""
        inv_w = self._inv_w(lo, hi)
        c = self.coef[:, None, None] * inv_w[self.iu] * inv_w[self.ju]
        q = np.einsum("rk,kpn->rpn", self.xx, c)
        return self.const - 0.5 * q + self._shared(lo, hi, inv_w)

    def log_values_rows(self, rows, lo, hi, which):
        """Values for row ``rows[r]`` on panel ``which[r]``; shape (R, nodes)."""
        inv_w = self._inv_w(lo, hi)
        c = self.coef[:, None, None] * inv_w[self.iu] * inv_w[self.ju]
        q = np.einsum("rk,krn->rn", self.xx[rows], c[:, which])
        return self.const - 0.5 * q + self._shared(lo, hi, inv_w)[which]


def _kronrod_estimate(fv, half, wk, wg):
    """Kronrod values and QUADPACK error estimates along the last axis of ``fv``."""
    kron = (fv @ wk) * half
    gauss = (fv @ wg) * half
    mean = kron / (2.0 * half)
    resabs = kron  # integrand is positive
    resasc = (np.abs(fv - mean[..., None]) @ wk) * half
    err = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where(resasc > 0, scaled, err)
    return kron, np.maximum(err, 50.0 * np.finfo(float).eps * resabs)


def _integrate_rows(integrand, rel_tol, abs_tol, max_panels):
    """Per-row adaptive integration of exp(log integrand - shift) over z.

    All rows start from the same breakpoints; afterwards each row keeps its
    own set of leaf panels and bisects only those whose error is within a
    factor 4 of its worst panel, so a row's result does not depend on which
    other rows are present. Panels requested by several rows share one
    evaluation of the mixing quantiles. Returns (shift, value, abs_error).
    """
    nodes, wk, wg = kronrod_rule()
    lo0 = _INITIAL_BREAKS[:-1]
    hi0 = _INITIAL_BREAKS[1:]
    half0 = 0.5 * (hi0 - lo0)
    k_rows = integrand.xx.shape[0]
    g = integrand.log_values(lo0, hi0)
    shift = g.reshape(k_rows, -1).max(axis=1)
    if not np.all(np.isfinite(shift)):
        raise FloatingPointError("non-finite density integrand")
    kron, err = _kronrod_estimate(np.exp(g - shift[:, None, None]), half0, wk, wg)

    # flat table of leaf panels: one record per (row, panel)
    row = np.repeat(np.arange(k_rows), lo0.size)
    lo = np.tile(lo0, k_rows)
    hi = np.tile(hi0, k_rows)
    kron = kron.ravel()
    err = err.ravel()
    while True:
        total = np.bincount(row, kron, minlength=k_rows)
        total_err = np.bincount(row, err, minlength=k_rows)
        tol = np.maximum(abs_tol, rel_tol * np.abs(total))
        active = total_err > tol
        if not active.any():
            return shift, total, total_err
        worst = np.zeros(k_rows)
        np.maximum.at(worst, row, err)
        split = active[row] & (err >= 0.25 * worst[row])
        n_leaves = np.bincount(row, minlength=k_rows) + np.bincount(row[split], minlength=k_rows)
        if n_leaves.max() > max_panels:
            raise ConvergenceError(
                f"density quadrature exceeded {max_panels} panels "
                f"(worst error ratio {np.max(total_err / tol):.3g})",
                (shift, total, total_err))
        plo, phi, prow = lo[split], hi[split], row[split]
        mid = 0.5 * (plo + phi)
        if np.any(~((mid > plo) & (mid < phi))):
            raise ConvergenceError("roundoff prevents further subdivision",
                                   (shift, total, total_err))
        clo = np.concatenate([plo, mid])
        chi = np.concatenate([mid, phi])
        crow = np.concatenate([prow, prow])
        panels, which = np.unique(clo + 1j * chi, return_inverse=True)
        ulo, uhi = panels.real, panels.imag
        uhalf = 0.5 * (uhi - ulo)
        gc = integrand.log_values_rows(crow, ulo, uhi, which)
        kc, ec = _kronrod_estimate(np.exp(gc - shift[crow, None]), uhalf[which], wk, wg)
        keep = ~split
        row = np.concatenate([row[keep], crow])
        lo = np.concatenate([lo[keep], clo])
        hi = np.concatenate([hi[keep], chi])
        kron = np.concatenate([kron[keep], kc])
        err = np.concatenate([err[keep], ec])


def log_density_terms(u, dof, corr, ws=None, rel_tol=DEFAULT_REL_TOL, abs_tol=0.0,
                      max_panels=4000):
    """Per-row log copula density for a batch ``u`` of shape (K, n).

    Each row is the log of

        integral_0^1 phi_Sigma(x / w(s)) prod_i w_i(s)^{-1} ds / prod_i f_{nu_i}(x_i)

    with ``x_i = t_{nu_i}^{-1}(u_i)`` and ``w_i(s) = G_{nu_i}^{-1}(s)``. The
    integral is taken over ``z = Phi^{-1}(s)`` on ``[-Z_MAX, Z_MAX]`` and
    evaluated as ``exp(shift) * int exp(g(z) - shift) dz``.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[None, :]
    n = u.shape[1]
    _check_shapes(n, None, corr)
    if np.any(~((u > 0) & (u < 1))):
        raise ValueError("u must lie strictly inside (0, 1)")
    nu = _as_nu(dof, n)
    ws = DensityWorkspace() if ws is None else ws
    x = ws.quantiles(u, nu)
    integrand = _MixingIntegrand(x, nu, corr, ws)
    shift, value, _ = _integrate_rows(integrand, rel_tol, abs_tol, max_panels)
    log_marg = special.t_logpdf(x, nu).sum(axis=1)
    return shift + np.log(value) - log_marg


def log_density(u, config, dof, corr, ws=None, rel_tol=DEFAULT_REL_TOL):
    """Log density of the grouped t-copula at a single interior point ``u``."""
    u = np.asarray(u, dtype=float).reshape(-1)
    _check_shapes(u.size, config, corr)
    return float(log_density_terms(u[None, :], dof, corr, ws, rel_tol)[0])


def log_likelihood(sample, config, dof, corr, ws=None, rel_tol=DEFAULT_REL_TOL):
    """Copula log-likelihood of a pseudo sample.

    Split as (sum of log mixing integrals) + (t-density kernel terms) +
    K * (gamma constants), so the constants are formed once per dof vector.
    When every component shares one dof the closed form of the standard
    t-copula is used instead of quadrature.
    """
    if not isinstance(sample, PseudoSample):
        sample = PseudoSample(sample)
    n = sample.dim
    _check_shapes(n, config, corr)
    nu = _as_nu(dof, n)
    if np.all(nu == nu[0]):
        return float(np.sum(standard_t_log_density(sample.u, nu[0], corr)))
    ws = DensityWorkspace() if ws is None else ws
    x = ws.quantiles(sample.u, nu)
    integrand = _MixingIntegrand(x, nu, corr, ws)
    try:
        shift, value, _ = _integrate_rows(integrand, rel_tol, 0.0, 4000)
    except ConvergenceError as exc:
        raise ConvergenceError(f"log-likelihood quadrature failed: {exc}", exc.result) from exc
    bad = np.flatnonzero(~(value > 0))
    if bad.size:
        raise FloatingPointError(f"non-positive density integral at observation {bad[0]}")
    log_int = shift + np.log(value)
    kernel = (0.5 * (nu + 1.0) * np.log1p(x * x / nu)).sum()
    consts = sample.n_obs * np.sum(
        0.5 * np.log(nu * np.pi) + gammaln(0.5 * nu) - gammaln(0.5 * (nu + 1.0)))
    return float(np.sum(log_int) + kernel + consts)


# ---------------------------------------------------------------------------
# maximum likelihood


@dataclass
class MleResult:
    dof: DofVector
    loglik: float
    converged: bool
    n_evals: int
    message: str = ""

    def __iter__(self):
        # unpacks as (dof, loglik)
        return iter((self.dof, self.loglik))


def _reflect(theta, lower, upper):
    """Fold a point back into (lower, upper) by mirror reflection per axis."""
    width = upper - lower
    y = np.mod(theta - lower, 2.0 * width)
    y = np.where(y > width, 2.0 * width - y, y)
    eps = 1e-9 * width
    return np.clip(lower + y, lower + eps, upper - eps)


def mle_fit(sample, config, corr, init=None, rel_tol=DEFAULT_REL_TOL, xatol=1e-5,
            fatol=1e-7, max_evals=2000):
    """Maximum-likelihood dof for a grouped t-copula with fixed correlation.

    Derivative-free Nelder-Mead over the ``m`` group dof values. Bounds are
    enforced by mirror reflection of each coordinate into ``(lower, upper)``.

    Returns
    -------
    MleResult
        ``converged`` is False when the evaluation budget ran out; the
        best point seen is returned regardless.
    """
    if not isinstance(sample, PseudoSample):
        sample = PseudoSample(sample)
    _check_shapes(sample.dim, config, corr)
    if init is None:
        init = DofVector(np.full(config.dim, 10.0))
    lower, upper = init.lower, init.upper
    theta0 = config.collapse(init.values)
    ws = DensityWorkspace()
    best = {"f": np.inf, "theta": theta0.copy()}
    n_evals = 0

    def objective(theta):
        nonlocal n_evals
        t = _reflect(np.asarray(theta, dtype=float), lower, upper)
        n_evals += 1
        ll = log_likelihood(sample, config, config.expand(t), corr, ws, rel_tol)
        if -ll < best["f"]:
            best["f"] = -ll
            best["theta"] = t.copy()
        return -ll

    f0 = objective(theta0)
    res = optimize.minimize(
        objective, theta0, method="Nelder-Mead",
        options={"xatol": xatol, "fatol": fatol, "maxfev": max_evals,
                 "initial_simplex": _initial_simplex(theta0, lower, upper)})
    theta = best["theta"]
    loglik = -best["f"]
    if loglik < -f0:
        theta, loglik = theta0, -f0
    converged = bool(res.success)
    if not converged:
        logger.warning("mle_fit for %s did not converge: %s", config, res.message)
    return MleResult(DofVector(config.expand(theta), lower, upper), float(loglik),
                     converged, n_evals, str(res.message))


def _initial_simplex(theta0, lower, upper):
    m = theta0.size
    simplex = np.tile(theta0, (m + 1, 1))
    for i in range(m):
        step = 0.25 * theta0[i] if theta0[i] > 1e-3 else 0.5
        trial = theta0[i] + step
        if trial >= upper:
            trial = theta0[i] - step
        simplex[i + 1, i] = trial
    return simplex
