"""Synthetic data with known ground truth for every pipeline stage."""

from __future__ import annotations

import datetime as dt
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .car import phi_bounds
from .errors import InputError
from .exposure import ElevationGrid, EventRecord, Track
from .geometry import box
from .graph import graph_from_edge_list, queen_from_polygons, weights
from .rng import CAR_FIELD, FIXTURE, REGRESSION, SURVEY, stream

TERTILE = 0.43
LABELS = ("decreased", "unchanged", "increased")
REFERENCE_LOADINGS = (0.63, 0.54, 0.45)


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    n_units: int = 46
    respondents_per_unit: int | tuple[int, int] = (1, 150)
    true_loadings: tuple = REFERENCE_LOADINGS
    true_phi: float = 0.0
    true_beta: tuple = ()
    noise_sd: float = 1.0
    na_rate: float = 0.0

    def __post_init__(self):
        if self.seed is None:
            raise InputError("seed is mandatory")
        if self.n_units < 1:
            raise InputError("n_units must be >= 1")
        rpu = self.respondents_per_unit
        lo, hi = (rpu, rpu) if isinstance(rpu, int) else rpu
        if lo < 1 or hi < lo:
            raise InputError("respondents_per_unit must be >= 1 (and lo <= hi for a range)")


def gen_survey(spec: SynthSpec, unit_labels, unit_effects=None) -> list[tuple]:
    """One-factor ordinal survey rows ``(respondent_id, unit_label, answers)``.

    Each respondent's latent factor is N(0, 1), shifted by ``unit_effects[u]``
    when given; item latents are ``l * f + sqrt(1 - l^2) * e`` cut at +-0.43.
    """
    lam = np.asarray(spec.true_loadings, dtype=float)
    if lam.shape != (3,):
        raise InputError("gen_survey needs exactly 3 loadings")
    if np.any(np.abs(lam) >= 1):
        raise InputError("loadings must lie strictly inside (-1, 1)")
    rng = stream(spec.seed, SURVEY)
    rpu = spec.respondents_per_unit
    lo, hi = (rpu, rpu) if isinstance(rpu, int) else rpu
    unique = np.sqrt(1.0 - lam**2)
    rows = []
    for u, unit in enumerate(unit_labels):
        m = int(rng.integers(lo, hi + 1))
        shift = 0.0 if unit_effects is None else float(unit_effects[u])
        f = rng.standard_normal(m) + shift
        latent = f[:, None] * lam + rng.standard_normal((m, 3)) * unique
        codes = np.digitize(latent, (-TERTILE, TERTILE))
        na = rng.random((m, 3)) < spec.na_rate
        for i in range(m):
            answers = ["na" if na[i, j] else LABELS[codes[i, j]] for j in range(3)]
            rows.append((f"{unit}-{i + 1:04d}", str(unit), answers))
    return rows


def gen_car_field(w, phi: float, sigma2: float, mean: float, seed: int) -> np.ndarray:
    """Draw ``Y ~ N(mean, sigma2 (I - phi W)^-1)`` through the precision's Cholesky factor."""
    lo, hi = phi_bounds(w)
    if not lo < phi < hi:
        raise InputError(f"phi = {phi} is outside the admissible interval ({lo:.6g}, {hi:.6g})")
    if sigma2 < 0:
        raise InputError("sigma2 must be non-negative")
    n = w.n
    rng = stream(seed, CAR_FIELD)
    z = rng.standard_normal(n)
    if sigma2 == 0:
        return np.full(n, float(mean))
    # precision = U'U with U upper triangular; Y - mean = U^-1 z has covariance (U'U)^-1
    U = cholesky(np.eye(n) - phi * np.asarray(w.values, dtype=float), lower=False)
    return mean + np.sqrt(sigma2) * solve_triangular(U, z, lower=False)


def gen_regression(x, beta, sigma: float, seed: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if x.ndim != 2 or x.shape[1] != beta.size:
        raise InputError("x columns and beta length disagree")
    rng = stream(seed, REGRESSION)
    noise = rng.standard_normal(x.shape[0])
    if sigma == 0:
        return x @ beta
    return x @ beta + sigma * noise


def grid_graph(n_rows: int, n_cols: int, queen: bool = True):
    """Neighbour graph of an ``n_rows x n_cols`` lattice (row-major labels)."""
    labels = [f"{r:03d}{c:03d}" for r in range(n_rows) for c in range(n_cols)]
    steps = [(0, 1), (1, 0)] + ([(1, 1), (1, -1)] if queen else [])
    edges = []
    for r in range(n_rows):
        for c in range(n_cols):
            for dr, dc in steps:
                rr, cc = r + dr, c + dc
                if 0 <= rr < n_rows and 0 <= cc < n_cols:
                    edges.append((labels[r * n_cols + c], labels[rr * n_cols + cc]))
    return graph_from_edge_list(labels, edges)


# ---------------------------------------------------------------------------
# bundled fixture: a 46-county coastal strip with survey, geometry and events

RESILIENCE = ("social", "economic", "infrastructure", "community_capital", "institutional", "environmental")
CELL_MILES = 30.0
_N_COLS, _N_ROWS = 8, 6
_DROPPED = {(5, 0), (5, 7)}  # north-west and north-east corners


@dataclass
class Fixture:
    polygons: list
    graph: object
    survey_rows: list
    covariates: dict
    tracks: list
    events: list
    elevation: ElevationGrid
    truth: dict = field(default_factory=dict)


def fixture_counties():
    cells = []
    for r in range(_N_ROWS):
        for c in range(_N_COLS):
            if (r, c) in _DROPPED:
                continue
            cells.append((r, c))
    polys = []
    for k, (r, c) in enumerate(cells):
        fips = f"99{k + 1:03d}"
        x0, y0 = c * CELL_MILES, r * CELL_MILES
        polys.append((fips, box(x0, y0, x0 + CELL_MILES, y0 + CELL_MILES)))
    return polys


def _track(rng, x_start, date, event_id):
    ys = np.arange(-20.0, _N_ROWS * CELL_MILES + 40.0, 15.0)
    drift = rng.normal(0.0, 2.0, ys.size).cumsum() - 0.3 * (ys - ys[0])
    return Track(event_id, date, np.column_stack([x_start + drift, ys]))


def build_fixture(seed: int, spec: SynthSpec | None = None) -> Fixture:
    """Complete synthetic study area with known generating parameters."""
    spec = spec or SynthSpec(seed=seed, true_phi=0.1, true_beta=(0.35, 0.25), noise_sd=0.6)
    rng = stream(seed, FIXTURE)
    polys = fixture_counties()
    graph = queen_from_polygons(polys)
    labels = list(graph.unit_labels)
    n = len(labels)
    centers = np.array([p.exterior[:-1].mean(axis=0) for _, p in polys])

    covariates = {lab: {name: round(float(rng.uniform(0.2, 0.9)), 4) for name in RESILIENCE} for lab in labels}

    # historical major-hurricane tracks (wind zones) and recent landfalls (last event)
    tracks = [
        _track(rng, float(x), dt.date(1905 + 30 * i, 9, 1 + i), f"H{i + 1:02d}")
        for i, x in enumerate(rng.uniform(0.45, 0.85, 3) * _N_COLS * CELL_MILES)
    ]
    events = [EventRecord("L1995", "1995-08-20", labels, 90.0, 6.0, "tide")]
    for k, year in enumerate((1998, 2002, 2005, 2008, 2008)):
        x_land = float(rng.uniform(0.0, _N_COLS * CELL_MILES))
        hit = [lab for lab, (cx, _) in zip(labels, centers) if abs(cx - x_land) <= 45.0]
        wind = 5.0 * int(rng.integers(16, 31))
        surge = round(float(rng.uniform(3.0, 25.0)), 1)
        events.append(EventRecord(f"L{year}{k}", dt.date(year, 9, 1 + k), hit, wind, surge,
                                  "surge" if k % 3 == 0 else "tide"))
    events.append(EventRecord("L1989", "1989-09-01", labels[:10], 120.0, 12.0, "surge"))

    # elevation rises inland (north) at ~0.5 ft/mile; a few nodata cells offshore
    cs = 2.0
    n_cols_g = int(_N_COLS * CELL_MILES / cs)
    n_rows_g = int(_N_ROWS * CELL_MILES / cs)
    ys = (n_rows_g - np.arange(n_rows_g) - 0.5) * cs
    xs = (np.arange(n_cols_g) + 0.5) * cs
    elev = 0.5 * ys[:, None] + 8.0 * np.sin(xs[None, :] / 17.0) + rng.normal(0.0, 3.0, (n_rows_g, n_cols_g))
    elev = np.round(np.maximum(elev, 0.0), 1)
    elev[-1, : n_cols_g // 8] = -9999.0
    elevation = ElevationGrid((0.0, 0.0), cs, elev, -9999.0)

    # county-level latent shift: coastal proximity and economic resilience plus CAR noise
    coast = 1.0 - centers[:, 1] / (_N_ROWS * CELL_MILES)
    econ = np.array([covariates[lab]["economic"] for lab in labels])
    zc = (coast - coast.mean()) / coast.std()
    ze = (econ - econ.mean()) / econ.std()
    b_coast, b_econ = spec.true_beta or (0.0, 0.0)
    w = weights(graph, "binary")
    spatial = gen_car_field(w, spec.true_phi, 0.04, 0.0, seed)
    effects = b_coast * zc + b_econ * ze + spatial
    survey = gen_survey(spec, labels, effects)

    truth = {
        "seed": seed,
        "synth_spec": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items()},
        "unit_effect_model": "b_coast * z(coastal proximity) + b_econ * z(economic) + CAR(phi, 0.04)",
        "b_coast": b_coast,
        "b_econ": b_econ,
        "car_phi": spec.true_phi,
        "car_phi_bounds": list(phi_bounds(w)),
        "unit_effects": {lab: float(e) for lab, e in zip(labels, effects)},
        "n_units": n,
        "n_respondents": len(survey),
    }
    return Fixture(polys, graph, survey, covariates, tracks, events, elevation, truth)
