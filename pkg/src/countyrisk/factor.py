"""Ordinal item coding, principal-axis factoring and factor scores."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError, InputError, NormalizationError

CATEGORY_CODES = {"decreased": -1, "unchanged": 0, "increased": 1, "na": None}
ITEM_COLUMNS = ("q_number", "q_strength", "q_flooding")

HEYWOOD_CLAMP = 0.9995
PAF_TOL = 1e-6
PAF_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class CodedResponseMatrix:
    respondent_ids: tuple
    unit_labels: tuple
    values: np.ndarray
    missing: np.ndarray
    item_names: tuple = ITEM_COLUMNS

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        missing = np.asarray(self.missing, dtype=bool)
        if values.ndim != 2 or values.shape != missing.shape:
            raise InputError("values and missing mask must be 2-D arrays of the same shape")
        n = values.shape[0]
        if len(self.respondent_ids) != n or len(self.unit_labels) != n:
            raise InputError("respondent_ids, unit_labels and value rows disagree in length")
        if len(self.item_names) != values.shape[1]:
            raise InputError("item_names does not match the number of item columns")
        if not np.all(np.isin(values[~missing], (-1.0, 0.0, 1.0))):
            raise InputError("non-missing codes must be -1, 0 or +1")
        values = np.where(missing, np.nan, values)
        object.__setattr__(self, "respondent_ids", tuple(self.respondent_ids))
        object.__setattr__(self, "unit_labels", tuple(self.unit_labels))
        object.__setattr__(self, "item_names", tuple(self.item_names))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    @property
    def n_items(self) -> int:
        return self.values.shape[1]

    def complete_rows(self) -> np.ndarray:
        return ~self.missing.any(axis=1)


def code_responses(raw_rows, item_names=ITEM_COLUMNS) -> CodedResponseMatrix:
    """Map category labels to ordinal codes.

    ``raw_rows`` is an iterable of ``(respondent_id, unit_label, answers)``.
    Labels are case-insensitive; ``na`` becomes a missing cell.
    """
    ids, units, values, missing = [], [], [], []
    for rid, unit, answers in raw_rows:
        answers = list(answers)
        if len(answers) != len(item_names):
            raise InputError(f"row {rid}: expected {len(item_names)} answers, got {len(answers)}")
        row, miss = [], []
        for j, label in enumerate(answers, start=1):
            key = str(label).strip().lower()
            if key not in CATEGORY_CODES:
                raise InputError(f"row {rid}, item {j}: unrecognized category label {label!r}")
            code = CATEGORY_CODES[key]
            row.append(0.0 if code is None else float(code))
            miss.append(code is None)
        ids.append(rid)
        units.append(unit)
        values.append(row)
        missing.append(miss)
    shape = (len(values), len(item_names))
    return CodedResponseMatrix(
        tuple(ids),
        tuple(units),
        np.array(values, dtype=float).reshape(shape),
        np.array(missing, dtype=bool).reshape(shape),
        tuple(item_names),
    )


@dataclass(frozen=True, eq=False)
class FactorModel:
    loadings: np.ndarray
    communalities: np.ndarray
    uniquenesses: np.ndarray
    eigenvalues: np.ndarray
    proportion_variance: np.ndarray
    score_weights: np.ndarray
    item_means: np.ndarray
    item_sds: np.ndarray
    n_used: int
    item_names: tuple = ITEM_COLUMNS
    n_iter: int = 0
    warnings: tuple = field(default_factory=tuple)

    @property
    def n_factors(self) -> int:
        return self.loadings.shape[1]

    def to_dict(self) -> dict:
        return {
            "item_names": list(self.item_names),
            "loadings": self.loadings.tolist(),
            "communalities": self.communalities.tolist(),
            "uniquenesses": self.uniquenesses.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "proportion_variance": self.proportion_variance.tolist(),
            "score_weights": self.score_weights.tolist(),
            "item_means": self.item_means.tolist(),
            "item_sds": self.item_sds.tolist(),
            "n_used": self.n_used,
            "n_iter": self.n_iter,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FactorModel":
        arr = lambda k: np.asarray(d[k], dtype=float)  # noqa: E731
        return cls(
            loadings=arr("loadings"),
            communalities=arr("communalities"),
            uniquenesses=arr("uniquenesses"),
            eigenvalues=arr("eigenvalues"),
            proportion_variance=arr("proportion_variance"),
            score_weights=arr("score_weights"),
            item_means=arr("item_means"),
            item_sds=arr("item_sds"),
            n_used=int(d["n_used"]),
            item_names=tuple(d.get("item_names", ITEM_COLUMNS)),
            n_iter=int(d.get("n_iter", 0)),
            warnings=tuple(d.get("warnings", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def varimax(loadings: np.ndarray, normalize: bool = True, max_iter: int = 500, tol: float = 1e-10) -> np.ndarray:
    """Orthogonal varimax rotation (Kaiser row normalization by default).

    A single factor is returned untouched.
    """
    if loadings.shape[1] < 2:
        return loadings
    L = loadings.copy()
    if normalize:
        norms = np.sqrt((L**2).sum(axis=1))
        norms[norms == 0] = 1.0
        L = L / norms[:, None]
    p, k = L.shape
    T = np.eye(k)
    d = 0.0
    for _ in range(max_iter):
        B = L @ T
        u, s, vt = np.linalg.svd(L.T @ (B**3 - B @ np.diag((B**2).sum(axis=0)) / p))
        T = u @ vt
        d_new = s.sum()
        if d_new < d * (1 + tol):
            break
        d = d_new
    L = L @ T
    if normalize:
        L = L * norms[:, None]
    return L


def _smc(R: np.ndarray, warnings: list) -> np.ndarray:
    try:
        inv = np.linalg.inv(R)
        if not np.all(np.isfinite(inv)) or np.linalg.cond(R) > 1e12:
            raise np.linalg.LinAlgError
        return 1.0 - 1.0 / np.diag(inv)
    except np.linalg.LinAlgError:
        warnings.append("correlation matrix is singular; initial communalities set to max |r|")
        off = np.abs(R - np.diag(np.diag(R)))
        return off.max(axis=1)


def fit_paf(data: CodedResponseMatrix, k: int = 1) -> FactorModel:
    """Principal-axis factoring on complete cases, varimax-rotated.

    Factor score weights use the regression method, ``R^-1 Lambda``. Factor
    signs are fixed so that each column of loadings has a positive sum.
    """
    return fit_paf_array(data.values[data.complete_rows()], k, data.item_names)


def fit_paf_array(X, k: int = 1, item_names=None) -> FactorModel:
    """:func:`fit_paf` on a plain respondents x items array without missing values."""
    if k < 1:
        raise InputError("k must be >= 1")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise InputError("expected a finite 2-D respondents x items array")
    n, p = X.shape
    if item_names is None:
        item_names = tuple(f"item{j + 1}" for j in range(p))
    if n < k + 2 or p < k:
        raise InputError(f"need at least {k + 2} complete respondents and {k} items; have {n} and {p}")
    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=1)
    if np.any(sds == 0):
        bad = [item_names[j] for j in np.flatnonzero(sds == 0)]
        raise InputError(f"zero-variance item(s) among complete cases: {', '.join(bad)}")
    Z = (X - means) / sds
    R = (Z.T @ Z) / (n - 1)
    np.fill_diagonal(R, 1.0)
    if not np.all(np.isfinite(R)):
        raise EstimationError("correlation matrix is not finite")

    warnings: list[str] = []
    h2 = _smc(R, warnings)
    for it in range(1, PAF_MAX_ITER + 1):
        Rr = R.copy()
        np.fill_diagonal(Rr, h2)
        evals, evecs = np.linalg.eigh(Rr)
        order = np.argsort(evals)[::-1][:k]
        ev = np.clip(evals[order], 0.0, None)
        L = evecs[:, order] * np.sqrt(ev)
        h2_new = (L**2).sum(axis=1)
        if np.any(h2_new > 1.0):
            if not any("Heywood" in w for w in warnings):
                warnings.append(f"Heywood case: communality > 1 clamped to {HEYWOOD_CLAMP}")
            h2_new = np.minimum(h2_new, HEYWOOD_CLAMP)
        delta = float(np.max(np.abs(h2_new - h2)))
        h2 = h2_new
        if delta < PAF_TOL:
            break
    else:
        raise EstimationError(f"principal-axis iteration did not converge in {PAF_MAX_ITER} steps (last delta {delta:.3g})")

    # keep communality == row sum of squared loadings when clamped
    row = (L**2).sum(axis=1)
    over = row > 1.0
    if np.any(over):
        L[over] *= np.sqrt(HEYWOOD_CLAMP / row[over])[:, None]

    L = varimax(L)
    signs = np.where(L.sum(axis=0) < 0, -1.0, 1.0)
    L = L * signs

    communalities = (L**2).sum(axis=1)
    eigenvalues = (L**2).sum(axis=0)
    try:
        if np.linalg.cond(R) > 1e12:
            raise np.linalg.LinAlgError
        weights = np.linalg.solve(R, L)
    except np.linalg.LinAlgError:
        warnings.append("correlation matrix is singular; score weights use the pseudo-inverse")
        weights = np.linalg.pinv(R) @ L
    return FactorModel(
        loadings=L,
        communalities=communalities,
        uniquenesses=1.0 - communalities,
        eigenvalues=eigenvalues,
        proportion_variance=eigenvalues / p,
        score_weights=weights,
        item_means=means,
        item_sds=sds,
        n_used=n,
        item_names=tuple(item_names),
        n_iter=it,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True, eq=False)
class ScoreVector:
    respondent_ids: tuple
    unit_labels: tuple
    raw_scores: np.ndarray
    normalized_scores: np.ndarray
    min_raw: float
    max_raw: float


def minmax_normalize(raw: np.ndarray) -> tuple[np.ndarray, float, float]:
    raw = np.asarray(raw, dtype=float)
    if raw.size == 0:
        raise NormalizationError("cannot normalize an empty sample")
    lo, hi = float(raw.min()), float(raw.max())
    if hi == lo:
        raise NormalizationError("all scores identical (min == max); degenerate sample")
    out = (raw - lo) / (hi - lo)
    # pin the extremes exactly
    out[raw == lo] = 0.0
    out[raw == hi] = 1.0
    return out, lo, hi


def raw_scores(model: FactorModel, values: np.ndarray) -> np.ndarray:
    """Factor scores for complete rows of coded values, shape (n, k)."""
    Z = (np.asarray(values, dtype=float) - model.item_means) / model.item_sds
    return Z @ model.score_weights


def score(model: FactorModel, data: CodedResponseMatrix, factor: int = 0) -> ScoreVector:
    """Score complete-case respondents and min-max normalize one factor."""
    if tuple(data.item_names) != tuple(model.item_names):
        raise InputError(f"items {data.item_names} do not match the model's {model.item_names}")
    keep = data.complete_rows()
    raw = raw_scores(model, data.values[keep])[:, factor]
    normalized, lo, hi = minmax_normalize(raw)
    idx = np.flatnonzero(keep)
    return ScoreVector(
        respondent_ids=tuple(data.respondent_ids[i] for i in idx),
        unit_labels=tuple(data.unit_labels[i] for i in idx),
        raw_scores=raw,
        normalized_scores=normalized,
        min_raw=lo,
        max_raw=hi,
    )
