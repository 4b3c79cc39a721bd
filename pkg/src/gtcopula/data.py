"""From raw price series to pseudo-observations.

log returns -> GARCH(1,1) Gaussian quasi-ML filter -> standardized residuals
-> ranks / (K + 1) -> Kendall's tau correlation matrix.
"""

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal, stats

from .copula import CorrelationMatrix, PseudoSample

__all__ = [
    "PriceSeries",
    "CsvSchema",
    "IngestResult",
    "GarchParams",
    "GarchFitError",
    "ResidualMatrix",
    "csv_header",
    "ingest_csv",
    "log_returns",
    "garch_fit",
    "garch_filter",
    "garch_unfilter",
    "to_pseudo_obs",
    "kendall_tau_matrix",
    "tau_to_corr",
    "nearest_correlation",
    "kendall_corr",
    "write_matrix",
    "read_matrix",
]

logger = logging.getLogger(__name__)

MISSING = {"", "ND", "NA", "NAN", "N/A"}


@dataclass
class PriceSeries:
    dates: np.ndarray
    prices: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.prices = np.asarray(self.prices, dtype=float)
        if self.dates.shape != self.prices.shape:
            raise ValueError("dates and prices must have equal length")
        if self.dates.size > 1 and np.any(np.diff(self.dates) <= np.timedelta64(0, "D")):
            raise ValueError(f"{self.label}: dates must be strictly increasing")
        bad = np.flatnonzero(~(self.prices > 0))
        if bad.size:
            raise ValueError(f"{self.label}: non-positive price on {self.dates[bad[0]]}")

    def __len__(self):
        return self.prices.size


@dataclass
class CsvSchema:
    """Layout of a price file.

    ``columns`` selects asset columns (default: every non-date column);
    ``invert`` lists assets quoted as currency per USD that should be turned
    into USD per currency unit.
    """

    date_column: str = "date"
    columns: tuple = None
    invert: tuple = ()
    date_format: str = None


@dataclass
class IngestResult:
    series: list
    n_dropped: int = 0

    @property
    def labels(self):
        return [s.label for s in self.series]

    def price_matrix(self):
        return np.column_stack([s.prices for s in self.series])


def _parse_date(text, fmt, line_no):
    text = text.strip()
    formats = [fmt] if fmt else ["%Y-%m-%d", "%m/%d/%Y"]
    for f in formats:
        try:
            return np.datetime64(dt.datetime.strptime(text, f).date(), "D")
        except ValueError:
            continue
    raise ValueError(f"line {line_no}: cannot parse date {text!r}")


def csv_header(path):
    """Column names and delimiter of a comma- or tab-delimited file."""
    with open(path, newline="") as fh:
        for line in fh:
            if line.strip():
                delimiter = "\t" if "\t" in line else ","
                return [h.strip() for h in next(csv.reader([line], delimiter=delimiter))], delimiter
    return [], ","


def ingest_csv(path, schema=None):
    """Read a comma- or tab-delimited price file.

    Rows with a missing value (empty cell or ``ND``) in any selected column
    are dropped so that all series stay aligned on the same dates; the
    number dropped is logged and returned.
    """
    schema = schema or CsvSchema()
    with open(path, newline="") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(lines, delimiter=delimiter)
    header = [h.strip() for h in next(reader)]
    if schema.date_column not in header:
        raise ValueError(f"{path}: date column {schema.date_column!r} not in header {header}")
    columns = list(schema.columns) if schema.columns else [
        h for h in header if h != schema.date_column]
    missing_cols = [c for c in columns if c not in header]
    if missing_cols:
        raise ValueError(f"{path}: columns {missing_cols} not in header {header}")
    for c in schema.invert:
        if c not in columns:
            raise ValueError(f"{path}: cannot invert unknown column {c!r}")
    di = header.index(schema.date_column)
    idx = [header.index(c) for c in columns]

    dates, rows = [], []
    dropped = 0
    for line_no, rec in enumerate(reader, start=2):
        if len(rec) < len(header):
            rec = rec + [""] * (len(header) - len(rec))
        date = _parse_date(rec[di], schema.date_format, line_no)
        cells = [rec[i].strip() for i in idx]
        if any(c.upper() in MISSING for c in cells):
            dropped += 1
            continue
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise ValueError(f"line {line_no}: {exc}") from None
        dates.append(date)
        rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no complete rows")
    if dropped:
        logger.warning("%s: dropped %d row(s) with missing values", path, dropped)
    prices = np.array(rows, dtype=float)
    dates = np.array(dates, dtype="datetime64[D]")
    series = []
    for j, name in enumerate(columns):
        p = prices[:, j]
        if name in schema.invert:
            p = 1.0 / p
        series.append(PriceSeries(dates, p, name))
    return IngestResult(series, dropped)


def log_returns(series):
    """Daily log returns ``ln S_t - ln S_{t-1}``."""
    prices = series.prices if isinstance(series, PriceSeries) else np.asarray(series, float)
    if prices.size < 2:
        raise ValueError("need at least two prices")
    if np.any(~(prices > 0)):
        bad = int(np.flatnonzero(~(prices > 0))[0])
        where = series.dates[bad] if isinstance(series, PriceSeries) else bad
        raise ValueError(f"non-positive price at {where}")
    return np.diff(np.log(prices))


# ---------------------------------------------------------------------------
# GARCH(1,1)


@dataclass
class GarchParams:
    mu: float
    omega: float
    alpha: float
    beta: float
    sigma0_sq: float
    loglik: float = float("nan")
    std_errors: dict = field(default_factory=dict)
    converged: bool = True
    message: str = ""

    def __post_init__(self):
        if self.omega < 0 or self.alpha < 0 or self.beta < 0:
            raise ValueError("GARCH parameters omega, alpha, beta must be >= 0")
        if self.alpha + self.beta >= 1:
            raise ValueError("GARCH stationarity requires alpha + beta < 1")
        if not self.sigma0_sq > 0:
            raise ValueError("initial variance must be positive")

    def as_row(self):
        return [self.mu, self.omega, self.alpha, self.beta, self.sigma0_sq, self.loglik]


class GarchFitError(RuntimeError):
    pass


def _variance_path(e, omega, alpha, beta, sigma0_sq):
    # sigma2_t - beta sigma2_{t-1} = omega + alpha e_{t-1}^2, sigma2_0 = sigma0_sq
    drive = np.empty_like(e)
    drive[0] = sigma0_sq
    drive[1:] = omega + alpha * e[:-1] ** 2
    return signal.lfilter([1.0], [1.0, -beta], drive)


def _neg_qll(params, x, sigma0_sq):
    mu, omega, alpha, beta = params
    e = x - mu
    s2 = _variance_path(e, omega, alpha, beta, sigma0_sq)
    if np.any(~(s2 > 0)):
        return np.inf
    return 0.5 * np.sum(np.log(2 * np.pi) + np.log(s2) + e * e / s2)


def _num_hessian(f, x, rel_step=1e-4):
    x = np.asarray(x, float)
    k = x.size
    h = rel_step * np.maximum(np.abs(x), 1e-2)
    hess = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = h[i]
            ej[j] = h[j]
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h[i] * h[j])
            hess[i, j] = hess[j, i] = val
    return hess


def _to_natural(z):
    # (alpha, beta, 1 - alpha - beta) as a softmax keeps the fit stationary
    mu, log_omega, a, b = z
    top = max(a, b, 0.0)
    ea, eb, e0 = np.exp(a - top), np.exp(b - top), np.exp(-top)
    tot = ea + eb + e0
    return np.array([mu, np.exp(log_omega), ea / tot, eb / tot])


def _to_unconstrained(p):
    mu, omega, alpha, beta = p
    rest = 1.0 - alpha - beta
    return np.array([mu, np.log(omega), np.log(alpha / rest), np.log(beta / rest)])


def garch_fit(returns, min_length=100, alpha_floor=1e-6):
    """Gaussian quasi-ML fit of ``x_t = mu + sigma_t eps_t`` with GARCH(1,1) variance.

    The variance recursion starts from the sample variance and ``mu`` is
    estimated jointly with ``(omega, alpha, beta)``. The search runs on
    returns scaled to unit variance, over an unconstrained reparameterization
    that keeps ``alpha + beta < 1``.

    When ``alpha`` ends up at the boundary (below ``alpha_floor``) the
    variance no longer reacts to shocks and ``beta`` is not identified; the
    fit is then reported as the constant-variance model
    ``alpha = beta = 0``, ``omega = mean((x - mu)^2)``.

    Returns
    -------
    GarchParams
        ``std_errors`` come from the inverse numerical Hessian in the natural
        parameters; they are omitted for boundary fits.
    """
    x = np.asarray(returns, dtype=float)
    if x.size < min_length:
        raise ValueError(f"need at least {min_length} returns, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("returns must be finite")
    scale = x.std()
    if not scale > 1e-12 * np.abs(x).max():
        raise GarchFitError("returns have zero variance")
    y = x / scale
    s0 = float(y.var())

    def obj(p):
        return _neg_qll(p, y, s0)

    def obj_z(z):
        with np.errstate(over="ignore"):
            return obj(_to_natural(z))

    best = None
    for a, b in [(0.01, 0.01), (0.05, 0.5), (0.05, 0.9), (0.1, 0.8), (0.03, 0.95)]:
        p0 = np.array([y.mean(), s0 * (1 - a - b), a, b])
        val = obj(p0)
        if best is None or val < best[0]:
            best = (val, p0)
    res = optimize.minimize(obj_z, _to_unconstrained(best[1]), method="BFGS",
                            options={"gtol": 1e-7, "maxiter": 2000})
    res = optimize.minimize(obj_z, res.x, method="Nelder-Mead",
                            options={"xatol": 1e-9, "fatol": 1e-11, "maxfev": 4000})
    p = _to_natural(res.x)
    if not np.isfinite(res.fun):
        raise GarchFitError(f"GARCH fit failed: {res.message}")
    mu, omega, alpha, beta = (float(v) for v in p)
    nll = float(res.fun)

    ses = {}
    converged = bool(res.success)
    message = str(res.message)
    if alpha < alpha_floor:
        # the search drifts along the flat beta direction; nothing to converge to
        converged = True
        message = "alpha at boundary; constant-variance model"
        mu = float(y.mean())
        omega = float(np.mean((y - mu) ** 2))
        alpha = beta = 0.0
        nll = obj(np.array([mu, omega, 0.0, 0.0]))
    else:
        try:
            cov = np.linalg.inv(_num_hessian(obj, np.array([mu, omega, alpha, beta])))
            var = np.diag(cov)
            if np.all(var > 0):
                se = np.sqrt(var)
                ses = {"mu": se[0] * scale, "omega": se[1] * scale**2,
                       "alpha": se[2], "beta": se[3]}
        except np.linalg.LinAlgError:
            pass
    loglik = -nll - x.size * np.log(scale)
    params = GarchParams(mu=mu * scale, omega=omega * scale**2, alpha=alpha, beta=beta,
                         sigma0_sq=s0 * scale**2, loglik=float(loglik), std_errors=ses,
                         converged=converged, message=message)
    if not converged:
        logger.warning("GARCH fit did not converge: %s", message)
    return params


def garch_conditional_variance(returns, params):
    x = np.asarray(returns, dtype=float)
    return _variance_path(x - params.mu, params.omega, params.alpha, params.beta,
                          params.sigma0_sq)


def garch_filter(returns, params):
    """Standardized residuals ``(x_t - mu) / sigma_t``."""
    x = np.asarray(returns, dtype=float)
    s2 = garch_conditional_variance(x, params)
    bad = np.flatnonzero(~(s2 > np.finfo(float).tiny))
    if bad.size:
        raise FloatingPointError(f"conditional variance underflow at index {bad[0]}")
    return (x - params.mu) / np.sqrt(s2)


def garch_unfilter(residuals, params):
    """Invert :func:`garch_filter`: rebuild returns from residuals."""
    eps = np.asarray(residuals, dtype=float)
    x = np.empty_like(eps)
    s2 = params.sigma0_sq
    for t in range(eps.size):
        if t > 0:
            s2 = params.omega + params.alpha * (x[t - 1] - params.mu) ** 2 + params.beta * s2
        x[t] = params.mu + np.sqrt(s2) * eps[t]
    return x


@dataclass
class ResidualMatrix:
    eps: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        if self.eps.ndim != 2:
            raise ValueError("residual matrix must be 2-d")
        if self.labels is not None:
            self.labels = tuple(self.labels)

    @property
    def n_obs(self):
        return self.eps.shape[0]

    @property
    def dim(self):
        return self.eps.shape[1]

    def variance_ok(self, band=(0.5, 2.0)):
        v = self.eps.var(axis=0, ddof=1)
        return bool(np.all((v >= band[0]) & (v <= band[1])))


# ---------------------------------------------------------------------------
# ranks and Kendall's tau


def to_pseudo_obs(residuals):
    """Scaled ranks ``rank / (K + 1)`` per column, ties get the average rank."""
    if isinstance(residuals, ResidualMatrix):
        eps, labels = residuals.eps, residuals.labels
    else:
        eps, labels = np.asarray(residuals, dtype=float), None
    if eps.ndim == 1:
        eps = eps[:, None]
    k = eps.shape[0]
    if k < 2:
        raise ValueError("need at least two observations")
    ranks = stats.rankdata(eps, method="average", axis=0)
    return PseudoSample(ranks / (k + 1.0), labels)


def kendall_tau_matrix(data):
    """Pairwise tau-b matrix (O(K log K) per pair)."""
    a = data.u if isinstance(data, PseudoSample) else np.asarray(data, dtype=float)
    k, n = a.shape
    if k < 2:
        raise ValueError("need at least two observations")
    for j in range(n):
        if np.all(a[:, j] == a[0, j]):
            raise ValueError(f"column {j} is constant; Kendall's tau undefined")
    tau = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            tau[i, j] = tau[j, i] = stats.kendalltau(a[:, i], a[:, j]).statistic
    return tau


def tau_to_corr(tau):
    """Elliptical-copula map ``sin(pi * tau / 2)``."""
    return np.sin(0.5 * np.pi * np.asarray(tau, dtype=float))


def nearest_correlation(m, eig_floor=1e-8):
    """Clip eigenvalues at ``eig_floor`` and rescale back to unit diagonal."""
    m = 0.5 * (np.asarray(m, float) + np.asarray(m, float).T)
    w, v = np.linalg.eigh(m)
    fixed = (v * np.maximum(w, eig_floor)) @ v.T
    d = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(d, d)
    fixed = 0.5 * (fixed + fixed.T)
    np.fill_diagonal(fixed, 1.0)
    return fixed


def kendall_corr(sample, clamp=1e-10):
    """Correlation matrix from pairwise Kendall's tau, projected to PD if needed."""
    sigma = tau_to_corr(kendall_tau_matrix(sample))
    off = ~np.eye(sigma.shape[0], dtype=bool)
    sigma[off] = np.clip(sigma[off], -1 + clamp, 1 - clamp)
    np.fill_diagonal(sigma, 1.0)
    try:
        return CorrelationMatrix(sigma)
    except ValueError:
        logger.info("Kendall correlation matrix not PD; projecting")
        return CorrelationMatrix(nearest_correlation(sigma))


# ---------------------------------------------------------------------------
# delimited text


def write_matrix(path, array, header, delimiter=","):
    """Write a 2-d array with a header row at full double precision."""
    array = np.atleast_2d(np.asarray(array))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for row in array:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (str, np.str_)):
        return str(v)
    return format(float(v), ".17g")


def read_matrix(path, delimiter=","):
    """Inverse of :func:`write_matrix`; returns (header, float array)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    header = rows[0]
    data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    return header, data.reshape(len(rows) - 1, len(header))
