"""Per-unit aggregation of normalized scores with the pooled-SRS variance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class CountyAggregate:
    unit_label: str
    n: int
    mean: float
    q1: float
    q3: float
    srs_variance: float
    missing: bool = False

    @classmethod
    def absent(cls, unit_label: str) -> "CountyAggregate":
        nan = math.nan
        return cls(unit_label, 0, nan, nan, nan, nan, missing=True)

    def response(self, name: str) -> float:
        if name not in ("mean", "q1", "q3"):
            raise InputError(f"unknown response {name!r}; expected mean, q1 or q3")
        return getattr(self, name)


def quantile(values, p: float) -> float:
    """Linear interpolation between order statistics at position 1 + (n-1)p."""
    return float(np.quantile(np.asarray(values, dtype=float), p, method="linear"))


def pooled_variance(scores) -> float:
    scores = np.asarray(scores, dtype=float)
    if scores.size < 2:
        return 0.0
    return float(np.var(scores, ddof=1))


def aggregate_scores(unit_labels, scores) -> list[CountyAggregate]:
    """Aggregate respondent scores to units, sorted by unit label.

    ``srs_variance`` for unit j is the pooled sample variance of every score
    in the study area divided by the unit's respondent count.
    """
    labels = list(unit_labels)
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise InputError("empty score vector")
    if len(labels) != scores.size:
        raise InputError("unit_labels and scores differ in length")
    if not np.all(np.isfinite(scores)):
        raise InputError("scores must be finite")
    s2 = pooled_variance(scores)
    groups: dict[str, list[float]] = {}
    for lab, s in zip(labels, scores):
        groups.setdefault(str(lab), []).append(float(s))
    out = []
    for lab in sorted(groups):
        vals = np.array(groups[lab])
        out.append(
            CountyAggregate(
                unit_label=lab,
                n=int(vals.size),
                mean=float(vals.mean()),
                q1=quantile(vals, 0.25),
                q3=quantile(vals, 0.75),
                srs_variance=s2 / vals.size,
            )
        )
    return out


def aggregate_score_vector(scores) -> list[CountyAggregate]:
    """Convenience wrapper taking a :class:`ScoreVector`."""
    return aggregate_scores(scores.unit_labels, scores.normalized_scores)


def align_to_units(aggregates, unit_labels) -> tuple[list[CountyAggregate], list[str]]:
    """Order aggregates by ``unit_labels``; absent units are carried as missing.

    Returns the aligned list and the labels that had no respondents.
    """
    by_label = {a.unit_label: a for a in aggregates}
    aligned, absent = [], []
    for lab in unit_labels:
        lab = str(lab)
        if lab in by_label:
            aligned.append(by_label[lab])
        else:
            aligned.append(CountyAggregate.absent(lab))
            absent.append(lab)
    return aligned, absent
