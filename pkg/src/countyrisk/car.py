"""Proper CAR model: maximum-likelihood fit, smoothing and response selection.

The model is ``Y ~ N(X beta, sigma2 (I - phi W)^-1)`` with binary symmetric W,
so the conditional mean of unit i is ``x_i beta + phi * sum_j w_ij (y_j - x_j beta)``.
With per-unit variances ``v`` the precision becomes
``V^-1/2 (I - phi W) V^-1/2 / sigma2``, giving conditional variances
``sigma2 * v_i`` and neighbour coefficients ``phi * w_ij * sqrt(v_i / v_j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import EstimationError, InputError
from .graph import WeightMatrix

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CarOptions:
    x: np.ndarray | None = None
    variances: np.ndarray | None = None
    phi_bracket: tuple[float, float] | None = None
    grid_size: int = 200
    tol: float = 1e-8
    boundary_tol: float = 1e-6


@dataclass(frozen=True, eq=False)
class CarFit:
    phi: float
    beta: np.ndarray
    sigma2: float
    loglik: float
    aic: float
    residual_variance: float
    fitted_nonspatial: np.ndarray
    smoothed: np.ndarray
    phi_bounds: tuple[float, float]
    warnings: tuple = field(default_factory=tuple)
    unit_labels: tuple = ()

    def to_dict(self) -> dict:
        return {
            "phi": self.phi,
            "beta": self.beta.tolist(),
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "aic": self.aic,
            "residual_variance": self.residual_variance,
            "phi_bounds": list(self.phi_bounds),
            "warnings": list(self.warnings),
        }


def _binary(w: WeightMatrix) -> np.ndarray:
    W = np.asarray(w.values, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise InputError("weight matrix must be square")
    if not np.array_equal(W, W.T) or not np.all(np.isin(W, (0.0, 1.0))):
        raise InputError("CAR requires symmetric binary weights")
    return W


def phi_bounds(w: WeightMatrix) -> tuple[float, float]:
    """Open interval of phi for which ``I - phi W`` is positive definite."""
    W = _binary(w)
    if np.any(W.sum(axis=1) == 0):
        raise InputError("every unit needs at least one neighbour")
    try:
        ev = np.linalg.eigvalsh(W)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"eigensolver failed: {exc}") from exc
    return 1.0 / float(ev[0]), 1.0 / float(ev[-1])


class _Profile:
    """Profile log-likelihood of phi with beta and sigma2 concentrated out."""

    def __init__(self, y, X, W, v):
        self.y, self.X, self.W = y, X, W
        self.n = y.size
        self.s = 1.0 / np.sqrt(v)  # V^-1/2 diagonal
        self.logdet_v = float(np.sum(np.log(v)))

    def precision(self, phi):
        return self.s[:, None] * (np.eye(self.n) - phi * self.W) * self.s[None, :]

    def solve(self, phi):
        A = self.precision(phi)
        try:
            c = cho_factor(A, lower=True)
        except np.linalg.LinAlgError:
            return None
        logdet = 2.0 * float(np.sum(np.log(np.diag(c[0]))))
        AX = A @ self.X
        beta = np.linalg.solve(self.X.T @ AX, AX.T @ self.y)
        r = self.y - self.X @ beta
        sigma2 = float(r @ A @ r) / self.n
        if sigma2 <= 0:
            return None
        ll = -0.5 * self.n * (math.log(2 * math.pi * sigma2) + 1.0) + 0.5 * logdet
        return ll, beta, sigma2

    def __call__(self, phi):
        out = self.solve(phi)
        return -math.inf if out is None else out[0]


def _golden(f, a, b, tol):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def fit_car(y, w: WeightMatrix, options: CarOptions | None = None) -> CarFit:
    """Maximum-likelihood CAR fit by grid bracketing plus golden-section search."""
    opts = options or CarOptions()
    y = np.asarray(y, dtype=float)
    W = _binary(w)
    n = W.shape[0]
    if y.ndim != 1 or y.size != n:
        raise InputError(f"response has length {y.size}, weight matrix has {n} units")
    if np.any(~np.isfinite(y)):
        raise InputError("response has missing values; drop or impute those units upstream")
    if n < 5:
        raise InputError("CAR fit needs at least 5 units")
    X = np.ones((n, 1)) if opts.x is None else np.asarray(opts.x, dtype=float).reshape(n, -1)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise InputError("design matrix is not of full column rank")
    if opts.variances is None:
        v = np.ones(n)
    else:
        v = np.asarray(opts.variances, dtype=float)
        if v.shape != (n,) or np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise InputError("per-unit variances must be positive and finite, one per unit")

    bounds = phi_bounds(w)
    prof = _Profile(y, X, W, v)
    warnings: list[str] = []

    if opts.phi_bracket is not None and opts.phi_bracket[0] == opts.phi_bracket[1]:
        phi = float(opts.phi_bracket[0])
        if not bounds[0] < phi < bounds[1]:
            raise InputError(f"fixed phi {phi} outside admissible interval {bounds}")
    else:
        lo, hi = bounds if opts.phi_bracket is None else opts.phi_bracket
        lo, hi = max(lo, bounds[0]), min(hi, bounds[1])
        grid = lo + (hi - lo) * np.arange(1, opts.grid_size + 1) / (opts.grid_size + 1)
        ll = np.array([prof(g) for g in grid])
        k = int(np.argmax(ll))
        a = grid[k - 1] if k > 0 else lo + 1e-12 * (hi - lo)
        b = grid[k + 1] if k < grid.size - 1 else hi - 1e-12 * (hi - lo)
        phi, ll_opt = _golden(prof, a, b, opts.tol)
        if not ll_opt >= ll[k]:
            phi = float(grid[k])
        if min(phi - bounds[0], bounds[1] - phi) < opts.boundary_tol:
            warnings.append(f"phi estimate {phi:.6g} is within {opts.boundary_tol} of the admissible boundary")

    out = prof.solve(phi)
    if out is None:
        raise EstimationError(f"I - phi W not positive definite at phi = {phi}")
    loglik, beta, sigma2 = out
    fitted = X @ beta
    smoothed = _smooth(phi, W, v, y, fitted)
    return CarFit(
        phi=float(phi),
        beta=beta,
        sigma2=sigma2,
        loglik=loglik,
        aic=-2.0 * loglik + 2.0 * (X.shape[1] + 2),
        residual_variance=float(np.var(y - smoothed, ddof=1)),
        fitted_nonspatial=fitted,
        smoothed=smoothed,
        phi_bounds=bounds,
        warnings=tuple(warnings),
        unit_labels=tuple(w.unit_labels),
    )


def _smooth(phi, W, v, y, fitted):
    s = np.sqrt(v)
    D = phi * W * s[:, None] / s[None, :]
    return fitted + D @ (y - fitted)


def smooth(fit: CarFit, y, w: WeightMatrix, variances=None) -> np.ndarray:
    """Conditional-mean smoothing: non-spatial fit plus the neighbours' residual share."""
    y = np.asarray(y, dtype=float)
    W = _binary(w)
    if y.size != W.shape[0]:
        raise InputError("response length does not match the weight matrix")
    v = np.ones(y.size) if variances is None else np.asarray(variances, dtype=float)
    return _smooth(fit.phi, W, v, y, fit.fitted_nonspatial)


@dataclass(frozen=True)
class Selection:
    best: str
    table: list
    warnings: tuple = ()


def select_response(candidates, tie_tol: float = 1e-6) -> Selection:
    """Choose the candidate with the lowest AIC; residual variance breaks near-ties.

    ``candidates`` is a sequence of ``(name, CarFit)`` or a mapping.
    """
    items = list(candidates.items()) if hasattr(candidates, "items") else list(candidates)
    if not items:
        raise InputError("no candidate fits supplied")
    warnings = []
    if len(items) == 1:
        warnings.append("only one candidate; selection is vacuous")
    best_aic = min(f.aic for _, f in items)
    tied = [(name, f) for name, f in items if f.aic - best_aic <= tie_tol]
    best = min(tied, key=lambda nf: nf[1].residual_variance)[0]
    table = [
        {"response": name, "aic": f.aic, "loglik": f.loglik, "residual_variance": f.residual_variance,
         "phi": f.phi, "selected": name == best}
        for name, f in items
    ]
    return Selection(best, table, tuple(warnings))
