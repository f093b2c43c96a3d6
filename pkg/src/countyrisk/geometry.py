"""Planar geometry primitives: polygons, even-odd containment, distances.

All coordinates are planar (projected); nothing here knows about the sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


def _as_ring(coords) -> np.ndarray:
    ring = np.asarray(coords, dtype=float)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise InputError("ring must be a sequence of (x, y) pairs")
    if len(ring) and not np.array_equal(ring[0], ring[-1]):
        ring = np.vstack([ring, ring[:1]])
    # distinct vertices = stored vertices minus the closing repeat
    if len(ring) < 4:
        raise InputError(f"degenerate polygon ring: {max(len(ring) - 1, 0)} distinct vertices, need >= 3")
    if not np.all(np.isfinite(ring)):
        raise InputError("ring has non-finite coordinates")
    return ring


@dataclass(frozen=True, eq=False)
class Polygon:
    """Closed planar polygon with optional holes.

    Rings are stored closed (first vertex repeated at the end). Open rings
    passed to the constructor are closed automatically.
    """

    exterior: np.ndarray
    holes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "exterior", _as_ring(self.exterior))
        object.__setattr__(self, "holes", tuple(_as_ring(h) for h in self.holes))

    @property
    def rings(self) -> list[np.ndarray]:
        return [self.exterior, *self.holes]

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        xmin, ymin = self.exterior.min(axis=0)
        xmax, ymax = self.exterior.max(axis=0)
        return float(xmin), float(ymin), float(xmax), float(ymax)

    @property
    def area(self) -> float:
        """Shoelace area of the exterior minus the holes."""
        def ring_area(r):
            return 0.5 * abs(float(np.dot(r[:-1, 0], r[1:, 1]) - np.dot(r[1:, 0], r[:-1, 1])))
        return ring_area(self.exterior) - sum(ring_area(h) for h in self.holes)

    def segments(self) -> np.ndarray:
        """All boundary segments (exterior and holes) as an (m, 2, 2) array."""
        return np.concatenate([np.stack([r[:-1], r[1:]], axis=1) for r in self.rings])

    def translated(self, dx: float, dy: float) -> "Polygon":
        shift = np.array([dx, dy])
        return Polygon(self.exterior + shift, tuple(h + shift for h in self.holes))

    def contains(self, x, y) -> np.ndarray:
        return points_in_polygon(self, x, y)


def box(xmin: float, ymin: float, xmax: float, ymax: float) -> Polygon:
    return Polygon([(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)])


def points_in_polygon(poly: Polygon, x, y) -> np.ndarray:
    """Even-odd rule containment for arrays of points.

    Crossings are counted over every ring, so holes subtract naturally.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    for ring in poly.rings:
        x0, y0 = ring[:-1, 0], ring[:-1, 1]
        x1, y1 = ring[1:, 0], ring[1:, 1]
        for xa, ya, xb, yb in zip(x0, y0, x1, y1):
            straddles = (ya > y) != (yb > y)
            if not np.any(straddles):
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                x_cross = xa + (y - ya) * (xb - xa) / (yb - ya)
            inside ^= straddles & (x < x_cross)
    return inside


def point_segment_distance(px, py, segments: np.ndarray) -> np.ndarray:
    """Distance from each point to its nearest segment.

    ``segments`` is (m, 2, 2); the result has the broadcast shape of px, py.
    """
    px = np.asarray(px, dtype=float)[..., None]
    py = np.asarray(py, dtype=float)[..., None]
    ax, ay = segments[:, 0, 0], segments[:, 0, 1]
    dx = segments[:, 1, 0] - ax
    dy = segments[:, 1, 1] - ay
    len2 = dx * dx + dy * dy
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((px - ax) * dx + (py - ay) * dy) / len2
    t = np.where(len2 > 0, np.clip(t, 0.0, 1.0), 0.0)
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return np.sqrt(ex * ex + ey * ey).min(axis=-1)


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def segment_set_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Minimum distance between two sets of segments, (m, 2, 2) and (k, 2, 2)."""
    p, q = a[:, None, 0, :], a[:, None, 1, :]
    r, s = b[None, :, 0, :], b[None, :, 1, :]
    d1 = _orient(p[..., 0], p[..., 1], q[..., 0], q[..., 1], r[..., 0], r[..., 1])
    d2 = _orient(p[..., 0], p[..., 1], q[..., 0], q[..., 1], s[..., 0], s[..., 1])
    d3 = _orient(r[..., 0], r[..., 1], s[..., 0], s[..., 1], p[..., 0], p[..., 1])
    d4 = _orient(r[..., 0], r[..., 1], s[..., 0], s[..., 1], q[..., 0], q[..., 1])
    if np.any((d1 * d2 < 0) & (d3 * d4 < 0)):
        return 0.0
    # no proper crossing: the minimum is attained at an endpoint
    best = min(
        point_segment_distance(a[:, 0, 0], a[:, 0, 1], b).min(),
        point_segment_distance(a[:, 1, 0], a[:, 1, 1], b).min(),
        point_segment_distance(b[:, 0, 0], b[:, 0, 1], a).min(),
        point_segment_distance(b[:, 1, 0], b[:, 1, 1], a).min(),
    )
    return float(best)


def boundary_distance(a: Polygon, b: Polygon) -> float:
    """Minimum distance between the boundaries of two polygons."""
    return segment_set_distance(a.segments(), b.segments())
