"""Objective hurricane-exposure covariates from planar geometry and event tables."""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, InputError, ResolutionError
from .geometry import Polygon, point_segment_distance, points_in_polygon

log = logging.getLogger(__name__)

DEFAULT_RADIUS = 50.0  # miles
DEFAULT_THRESHOLD = 35.0  # feet
DEFAULT_CUTOFF_YEAR = 1992

_CHUNK = 20000


def _as_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value).strip())


@dataclass(frozen=True, eq=False)
class Track:
    event_id: str
    date: dt.date
    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise InputError(f"track {self.event_id}: need at least 2 (x, y) vertices")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "date", _as_date(self.date))

    def segments(self) -> np.ndarray:
        return np.stack([self.vertices[:-1], self.vertices[1:]], axis=1)


@dataclass(frozen=True, eq=False)
class ElevationGrid:
    """Raster in feet; ``origin`` is the lower-left corner, rows run north to south."""

    origin: tuple[float, float]
    cell_size: float
    values: np.ndarray
    nodata: float = -9999.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.size == 0:
            raise InputError("elevation grid must be a non-empty 2-D array")
        if not self.cell_size > 0 or not math.isfinite(self.cell_size):
            raise InputError("cell size must be positive")
        object.__setattr__(self, "values", v)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return x0, y0, x0 + self.n_cols * self.cell_size, y0 + self.n_rows * self.cell_size

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        x0, y0 = self.origin
        xs = x0 + (np.arange(self.n_cols) + 0.5) * self.cell_size
        ys = y0 + (self.n_rows - np.arange(self.n_rows) - 0.5) * self.cell_size
        return np.meshgrid(xs, ys)


@dataclass(frozen=True)
class EventRecord:
    event_id: str
    date: dt.date
    affected_units: tuple
    max_wind: float
    peak_surge: float
    surge_or_tide: str = "surge"

    def __post_init__(self):
        object.__setattr__(self, "date", _as_date(self.date))
        object.__setattr__(self, "affected_units", tuple(str(u) for u in self.affected_units))
        if self.max_wind < 0 or self.max_wind % 5 != 0:
            raise InputError(f"event {self.event_id}: max wind {self.max_wind} kt is not a non-negative multiple of 5")
        if self.peak_surge < 0:
            raise InputError(f"event {self.event_id}: negative peak surge")
        if self.surge_or_tide not in ("surge", "tide"):
            raise InputError(f"event {self.event_id}: surge_or_tide must be 'surge' or 'tide'")


def _sample_grid(poly: Polygon, resolution: float):
    xmin, ymin, xmax, ymax = poly.bounds
    nx = max(1, math.ceil((xmax - xmin) / resolution))
    ny = max(1, math.ceil((ymax - ymin) / resolution))
    # local frame keeps results independent of where the county sits
    xs = (np.arange(nx) + 0.5) * resolution
    ys = (np.arange(ny) + 0.5) * resolution
    return np.meshgrid(xs, ys), (xmin, ymin)


def buffer_fraction(county: Polygon, tracks, radius: float = DEFAULT_RADIUS, resolution: float | None = None) -> float:
    """Share of the county within ``radius`` of any track, by grid sampling.

    Samples sit at cell centres of a regular grid over the county's bounding
    box; the denominator is the number of samples inside the county.
    """
    if not radius > 0:
        raise InputError("radius must be positive")
    xmin, ymin, xmax, ymax = county.bounds
    short = min(xmax - xmin, ymax - ymin)
    if resolution is None:
        resolution = short / 100.0
    if not resolution > 0 or resolution > short / 10.0:
        raise InputError(f"resolution {resolution} must be positive and <= 1/10 of the bounding box's shorter side ({short})")
    tracks = list(tracks)
    (gx, gy), (ox, oy) = _sample_grid(county, resolution)
    local = county.translated(-ox, -oy)
    inside = points_in_polygon(local, gx, gy)
    px, py = gx[inside], gy[inside]
    if px.size == 0:
        raise ResolutionError("no samples fall inside the county; use a finer resolution")
    if not tracks:
        log.warning("no tracks supplied; wind-zone fraction is 0")
        return 0.0
    segs = np.concatenate([t.segments() for t in tracks]) - np.array([ox, oy])
    hit = np.zeros(px.size, dtype=bool)
    for start in range(0, px.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        hit[sl] = point_segment_distance(px[sl], py[sl], segs) <= radius
    return float(hit.sum()) / px.size


def below_elevation_fraction(county: Polygon, grid: ElevationGrid, threshold: float = DEFAULT_THRESHOLD) -> float:
    """Share of valid cells (centres inside the county) at or below ``threshold``."""
    xmin, ymin, xmax, ymax = county.bounds
    gx0, gy0, gx1, gy1 = grid.bounds
    if xmax < gx0 or xmin > gx1 or ymax < gy0 or ymin > gy1:
        raise CoverageError("elevation grid does not overlap the county")
    cx, cy = grid.cell_centers()
    near = (cx >= xmin) & (cx <= xmax) & (cy >= ymin) & (cy <= ymax)
    inside = np.zeros_like(near)
    inside[near] = points_in_polygon(county, cx[near], cy[near])
    vals = grid.values[inside]
    valid = vals != grid.nodata
    if not np.any(valid):
        raise CoverageError("no valid elevation cells inside the county")
    return float(np.sum(vals[valid] <= threshold)) / float(valid.sum())


@dataclass(frozen=True)
class LastEvent:
    unit: str
    max_wind: float | None
    peak_surge: float | None
    event_id: str | None = None
    surge_or_tide: str | None = None
    missing: bool = field(default=False)

    def as_tuple(self):
        return self.max_wind, self.peak_surge


def last_event_covariates(events, unit, cutoff_year: int = DEFAULT_CUTOFF_YEAR) -> LastEvent:
    """Wind and surge of the latest event since ``cutoff_year`` affecting ``unit``.

    Same-day events resolve to the stronger wind. Units without a qualifying
    event come back flagged ``missing``.
    """
    unit = str(unit)
    hits = [e for e in events if e.date.year >= cutoff_year and unit in e.affected_units]
    if not hits:
        return LastEvent(unit, None, None, missing=True)
    best = max(hits, key=lambda e: (e.date, e.max_wind))
    return LastEvent(unit, float(best.max_wind), float(best.peak_surge), best.event_id, best.surge_or_tide)
