"""Areal neighbour graphs and spatial weight matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import InputError, IsolatedUnitError
from .geometry import Polygon, boundary_distance

SNAP_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    unit_labels: tuple
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        n = len(self.unit_labels)
        if adj.shape != (n, n):
            raise InputError("adjacency shape does not match the number of units")
        if len(set(self.unit_labels)) != n:
            raise InputError("duplicate unit labels")
        if not np.array_equal(adj, adj.T):
            raise InputError("adjacency must be symmetric")
        if np.any(np.diag(adj)):
            raise InputError("adjacency must not contain self-loops")
        degree = adj.sum(axis=1)
        if np.any(degree == 0):
            raise IsolatedUnitError([self.unit_labels[i] for i in np.flatnonzero(degree == 0)])
        adj.setflags(write=False)
        object.__setattr__(self, "unit_labels", tuple(self.unit_labels))
        object.__setattr__(self, "adjacency", adj)

    @property
    def n(self) -> int:
        return len(self.unit_labels)

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.n_edges / self.n

    def edges(self) -> list[tuple]:
        i, j = np.nonzero(np.triu(self.adjacency))
        return [(self.unit_labels[a], self.unit_labels[b]) for a, b in zip(i, j)]

    def index(self, label) -> int:
        return self.unit_labels.index(label)

    def subgraph(self, labels) -> "NeighborGraph":
        idx = [self.index(lab) for lab in labels]
        return NeighborGraph(tuple(labels), self.adjacency[np.ix_(idx, idx)])


def graph_from_edge_list(units, edges) -> NeighborGraph:
    units = [str(u) for u in units]
    pos = {u: i for i, u in enumerate(units)}
    adj = np.zeros((len(units), len(units)), dtype=bool)
    for a, b in edges:
        a, b = str(a), str(b)
        for u in (a, b):
            if u not in pos:
                raise InputError(f"edge ({a}, {b}) references unknown unit {u}")
        if a == b:
            raise InputError(f"self-loop edge ({a}, {a})")
        adj[pos[a], pos[b]] = adj[pos[b], pos[a]] = True
    return NeighborGraph(tuple(units), adj)


def queen_from_polygons(polygons, eps: float = SNAP_TOLERANCE) -> NeighborGraph:
    """Queen contiguity: neighbours iff boundaries come within ``eps``.

    ``polygons`` is a sequence of ``(unit_label, Polygon)``. A label may repeat
    (multi-part units); parts are merged under their first appearance.
    """
    parts: dict[str, list[Polygon]] = {}
    for label, poly in polygons:
        if not isinstance(poly, Polygon):
            poly = Polygon(poly)
        parts.setdefault(str(label), []).append(poly)
    labels = list(parts)
    n = len(labels)
    bbox = np.array([_union_bounds(parts[lab]) for lab in labels])
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        # bounding-box prefilter, inflated by eps
        cand = np.flatnonzero(
            (bbox[i + 1 :, 0] <= bbox[i, 2] + eps)
            & (bbox[i + 1 :, 2] >= bbox[i, 0] - eps)
            & (bbox[i + 1 :, 1] <= bbox[i, 3] + eps)
            & (bbox[i + 1 :, 3] >= bbox[i, 1] - eps)
        ) + i + 1
        for j in cand:
            if any(boundary_distance(a, b) <= eps for a in parts[labels[i]] for b in parts[labels[j]]):
                adj[i, j] = adj[j, i] = True
    return NeighborGraph(tuple(labels), adj)


def _union_bounds(polys) -> tuple:
    b = np.array([p.bounds for p in polys])
    return b[:, 0].min(), b[:, 1].min(), b[:, 2].max(), b[:, 3].max()


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    scheme: str
    values: np.ndarray
    s0: float
    unit_labels: tuple = ()

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def sparse(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(self.values)


SCHEMES = ("binary", "row_standardized")
_ALIASES = {"b": "binary", "binary": "binary", "r": "row_standardized", "row": "row_standardized",
            "row_standardized": "row_standardized"}


def weights(graph: NeighborGraph, scheme: str = "row_standardized") -> WeightMatrix:
    try:
        scheme = _ALIASES[scheme.lower()]
    except (KeyError, AttributeError):
        raise InputError(f"unknown weight scheme {scheme!r}; expected one of {SCHEMES}") from None
    W = graph.adjacency.astype(float)
    if scheme == "row_standardized":
        W = W / graph.degrees[:, None]
    W.setflags(write=False)
    return WeightMatrix(scheme, W, float(W.sum()), graph.unit_labels)
