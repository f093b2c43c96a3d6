"""Bayesian linear regression by Gibbs sampling, with model checks.

Prior: ``beta_j ~ N(0, prior_sd_beta^2)`` independently, ``p(sigma2) ∝ 1/sigma2``.
Full conditionals:

    beta | sigma2, y  ~ N(A^-1 X'y / sigma2, A^-1),  A = X'X / sigma2 + I / prior_sd^2
    sigma2 | beta, y  ~ Inv-Gamma(n / 2, RSS(beta) / 2)
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InputError
from .rng import GIBBS, PREDICTIVE, stream


@dataclass(frozen=True)
class GibbsConfig:
    n_chains: int = 4
    n_burn: int = 1000
    n_keep: int = 10000
    thin: int = 1
    seed: int = 0
    prior_sd_beta: float = 100.0
    workers: int = 1

    def __post_init__(self):
        if self.n_chains < 1 or self.n_keep // self.n_chains < 100:
            raise InputError("need n_chains >= 1 and at least 100 kept draws per chain")
        if self.prior_sd_beta <= 0:
            raise InputError("prior_sd_beta must be positive")
        if self.thin < 1 or self.n_burn < 0:
            raise InputError("thin must be >= 1 and n_burn >= 0")

    @property
    def per_chain(self) -> int:
        return self.n_keep // self.n_chains

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        return d


@dataclass(frozen=True)
class StandardizationRecord:
    names: tuple
    means: tuple
    sds: tuple

    def __getitem__(self, name):
        i = self.names.index(name)
        return self.means[i], self.sds[i]


def standardize(y, x, names=None):
    """Center and scale the response and every predictor column (n-1 sd).

    Returns ``(y_std, x_std, record)``; ``names`` lists the response name
    followed by one name per column of ``x``.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if names is None:
        names = ("y",) + tuple(f"x{j + 1}" for j in range(x.shape[1]))
    names = tuple(names)
    if len(names) != x.shape[1] + 1:
        raise InputError("names must cover the response and every predictor")
    data = np.column_stack([y, x])
    if not np.all(np.isfinite(data)):
        raise InputError("missing or non-finite values in regression data")
    means = data.mean(axis=0)
    sds = data.std(axis=0, ddof=1)
    for name, sd in zip(names, sds):
        if not sd > 0:
            raise InputError(f"column {name!r} has zero variance")
    z = (data - means) / sds
    return z[:, 0], z[:, 1:], StandardizationRecord(names, tuple(map(float, means)), tuple(map(float, sds)))


def unstandardize(z, mean: float, sd: float):
    return np.asarray(z, dtype=float) * sd + mean


@dataclass(frozen=True, eq=False)
class Posterior:
    beta: np.ndarray  # (draws, p)
    sigma2: np.ndarray  # (draws,)
    chain: np.ndarray  # (draws,)
    names: tuple
    rhat: dict
    warnings: tuple = field(default_factory=tuple)

    @property
    def n_draws(self) -> int:
        return self.sigma2.size

    @property
    def means(self) -> np.ndarray:
        return self.beta.mean(axis=0)

    def credible_sets(self, level: float = 0.95) -> np.ndarray:
        a = (1.0 - level) / 2.0
        return np.quantile(self.beta, [a, 1.0 - a], axis=0).T


def _run_chain(XtX_evals, Q, Xty, X, y, cfg: GibbsConfig, chain: int, sigma2: float):
    n, p = X.shape
    rng = stream(cfg.seed, GIBBS, chain)
    n_iter = cfg.n_burn + cfg.per_chain * cfg.thin
    # all randomness up front: sigma2's gamma shape n/2 does not depend on the state
    normals = rng.standard_normal((n_iter, p))
    gammas = rng.standard_gamma(n / 2.0, size=n_iter)
    b = Q.T @ Xty
    tau2_inv = 1.0 / cfg.prior_sd_beta**2
    tiny = np.finfo(float).tiny
    betas = np.empty((cfg.per_chain, p))
    sig = np.empty(cfg.per_chain)
    k = 0
    for t in range(n_iter):
        # eigenbasis of X'X: precision is diagonal, scaled to avoid dividing by sigma2
        denom = XtX_evals + sigma2 * tau2_inv
        beta = Q @ (b / denom + normals[t] * np.sqrt(sigma2 / denom))
        r = y - X @ beta
        rss = max(float(r @ r), tiny)
        sigma2 = max(0.5 * rss / gammas[t], tiny)
        if t >= cfg.n_burn and (t - cfg.n_burn) % cfg.thin == 0:
            betas[k] = beta
            sig[k] = sigma2
            k += 1
    return betas, sig


def split_rhat(draws: np.ndarray) -> float:
    """Split-chain potential scale reduction; ``draws`` is (chains, n)."""
    m, n = draws.shape
    half = n // 2
    if half < 2:
        return math.nan
    parts = np.concatenate([draws[:, :half], draws[:, n - half :]], axis=0)
    means = parts.mean(axis=1)
    W = parts.var(axis=1, ddof=1).mean()
    B = half * means.var(ddof=1)
    if W == 0:
        return 1.0 if B == 0 else math.inf
    var_plus = (half - 1) / half * W + B / half
    return float(math.sqrt(var_plus / W))


def gibbs_lm(y, x, config: GibbsConfig | None = None, names=None) -> Posterior:
    """Gibbs sampler for ``y = X beta + e``; ``x`` must already contain any intercept."""
    cfg = config or GibbsConfig()
    y = np.asarray(y, dtype=float)
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if y.shape != (n,):
        raise InputError("y and x disagree in length")
    if n <= p:
        raise InputError(f"need more observations than coefficients (n={n}, p={p})")
    if np.linalg.matrix_rank(X) < p:
        raise InputError("design matrix is rank deficient")
    names = tuple(names) if names is not None else tuple(f"b{j}" for j in range(p))
    XtX = X.T @ X
    evals, Q = np.linalg.eigh(XtX)
    Xty = X.T @ y
    beta_ols = np.linalg.lstsq(X, y, rcond=None)[0]
    r = y - X @ beta_ols
    sigma2_init = max(float(r @ r) / (n - p), np.finfo(float).tiny)

    run = lambda c: _run_chain(evals, Q, Xty, X, y, cfg, c, sigma2_init)  # noqa: E731
    if cfg.workers > 1 and cfg.n_chains > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            chains = list(ex.map(run, range(cfg.n_chains)))
    else:
        chains = [run(c) for c in range(cfg.n_chains)]

    beta = np.concatenate([c[0] for c in chains])
    sigma2 = np.concatenate([c[1] for c in chains])
    label = np.repeat(np.arange(cfg.n_chains), cfg.per_chain)
    rhat = {}
    for j, name in enumerate(names):
        rhat[name] = split_rhat(np.stack([c[0][:, j] for c in chains]))
    rhat["sigma2"] = split_rhat(np.stack([c[1] for c in chains]))
    warnings = tuple(
        f"rhat for {k} is {v:.3f} (> 1.1); chains may not have converged"
        for k, v in rhat.items() if v > 1.1
    )
    return Posterior(beta, sigma2, label, names, rhat, warnings)


def bayes_p(posterior: Posterior, y, x, seed: int = 0) -> float:
    """Posterior predictive p for the residual sum of squares.

    For each draw, ``y_rep ~ N(X beta, sigma2 I)``; the p-value is the share
    of draws where ``RSS(y_rep; beta) >= RSS(y; beta)``.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(x, dtype=float)
    if posterior.n_draws == 0:
        raise InputError("empty posterior")
    resid = y[None, :] - posterior.beta @ X.T
    rss_obs = np.einsum("ij,ij->i", resid, resid)
    rng = stream(seed, PREDICTIVE)
    eps = rng.standard_normal((posterior.n_draws, y.size))
    rss_rep = posterior.sigma2 * np.einsum("ij,ij->i", eps, eps)
    return float(np.mean(rss_rep >= rss_obs))


def deviance(y, X, beta, sigma2):
    """-2 log N(y | X beta, sigma2 I); vectorised over rows of ``beta``."""
    beta = np.atleast_2d(beta)
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    resid = y[None, :] - beta @ X.T
    rss = np.einsum("ij,ij->i", resid, resid)
    n = y.size
    return n * np.log(2 * np.pi * sigma2) + rss / sigma2


@dataclass(frozen=True)
class Diagnostics:
    bayes_p: float
    dic: float
    p_d: float
    warnings: tuple = ()


def dic(posterior: Posterior, y, x) -> tuple[float, float, tuple]:
    """DIC and effective parameter count ``p_D = mean(D) - D(posterior means)``."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(x, dtype=float)
    if posterior.n_draws == 0:
        raise InputError("empty posterior")
    D = deviance(y, X, posterior.beta, posterior.sigma2)
    d_bar = float(D.mean())
    d_hat = float(deviance(y, X, posterior.means, posterior.sigma2.mean())[0])
    p_d = d_bar - d_hat
    warnings = ()
    if p_d <= 0:
        warnings = (f"p_D = {p_d:.4g} <= 0; posterior may be far from normal or degenerate",)
    return d_bar + p_d, p_d, warnings


def diagnose(posterior: Posterior, y, x, seed: int = 0) -> Diagnostics:
    d, p_d, warnings = dic(posterior, y, x)
    return Diagnostics(bayes_p(posterior, y, x, seed), d, p_d, warnings)


@dataclass(frozen=True)
class CoefficientSummary:
    name: str
    mean: float
    lo95: float
    hi95: float
    significant: bool
    rhat: float
    raw_mean: float | None = None


def summarize(posterior: Posterior, standardization: StandardizationRecord | None = None) -> list[CoefficientSummary]:
    """Posterior mean and 95% quantile set per coefficient.

    A coefficient is flagged significant when its set excludes zero. With a
    standardization record, slopes are also mapped back to raw units.
    """
    means = posterior.means
    sets = posterior.credible_sets(0.95)
    out = []
    for j, name in enumerate(posterior.names):
        lo, hi = float(sets[j, 0]), float(sets[j, 1])
        m = float(means[j])
        # quantiles and mean of identical draws can differ by an ulp
        lo, hi = min(lo, m), max(hi, m)
        raw = None
        if standardization is not None and name in standardization.names[1:]:
            _, sd_y = standardization[standardization.names[0]]
            _, sd_x = standardization[name]
            raw = m * sd_y / sd_x
        out.append(CoefficientSummary(name, m, lo, hi, bool(lo > 0 or hi < 0), posterior.rhat.get(name, math.nan), raw))
    return out
