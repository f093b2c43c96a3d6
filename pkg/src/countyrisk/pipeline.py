"""End-to-end batch pipeline: survey rows to regression report."""

from __future__ import annotations

import logging
import platform
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from . import io as fio
from .aggregate import aggregate_score_vector, align_to_units
from .bayes import GibbsConfig, diagnose, gibbs_lm, standardize, summarize
from .car import CarOptions, fit_car, select_response
from .errors import CountyRiskError, InputError
from .exposure import (DEFAULT_CUTOFF_YEAR, DEFAULT_RADIUS, DEFAULT_THRESHOLD, below_elevation_fraction,
                       buffer_fraction, last_event_covariates)
from .factor import code_responses, fit_paf, score
from .graph import graph_from_edge_list, queen_from_polygons, weights
from .moran import moran_mc

log = logging.getLogger(__name__)

RESPONSES = ("mean", "q1", "q3")
EXPOSURE_COLUMNS = ("wind_zone_frac", "surge_zone_frac", "last_max_wind", "last_peak_surge")


class StageError(CountyRiskError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


@dataclass
class PipelineConfig:
    survey: str | None = None
    adjacency: str | None = None
    geojson: str | None = None
    id_property: str = "GEOID"
    covariates: str | None = None
    tracks: str | None = None
    events: str | None = None
    elevation: str | None = None
    response: str = "auto"
    use_srs_variance: bool = False
    permutations: int = 999
    radius: float = DEFAULT_RADIUS
    threshold: float = DEFAULT_THRESHOLD
    resolution: float | None = None
    cutoff_year: int = DEFAULT_CUTOFF_YEAR
    chains: int = 4
    burn: int = 1000
    keep: int = 10000
    thin: int = 1
    prior_sd: float = 100.0
    seed: int | None = None
    output_dir: str = "out"
    workers: int = 1
    write_draws: bool = False

    PATH_FIELDS = ("survey", "adjacency", "geojson", "covariates", "tracks", "events", "elevation")

    def validate(self):
        for name in self.PATH_FIELDS:
            value = getattr(self, name)
            if value is not None and not Path(value).is_file():
                raise InputError(f"input file not found for {name}: {value}")
        if self.survey is None:
            raise InputError("config needs a survey path")
        if self.adjacency is None and self.geojson is None:
            raise InputError("config needs an adjacency edge list or a GeoJSON of unit polygons")
        if self.covariates is None:
            raise InputError("config needs a covariates path")
        if self.seed is None:
            raise InputError("seed is required: the Moran and Gibbs stages are stochastic")
        if self.response not in RESPONSES + ("auto",):
            raise InputError(f"response must be one of {RESPONSES + ('auto',)}")
        exposure = [self.tracks, self.events, self.elevation]
        if any(exposure) and not all(exposure):
            raise InputError("tracks, events and elevation must be given together")
        if all(exposure) and self.geojson is None:
            raise InputError("exposure covariates need the unit polygons (geojson)")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_mapping(cls, data: dict, base_dir: Path | None = None) -> "PipelineConfig":
        """Build from a flat mapping or from TOML-style sections (one level deep)."""
        flat = {}
        for key, value in data.items():
            if isinstance(value, dict):
                flat.update(value)
            else:
                flat[key] = value
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(flat) - known)
        if unknown:
            raise InputError(f"unknown config key(s): {', '.join(unknown)}")
        cfg = cls(**flat)
        if base_dir is not None:
            for name in cls.PATH_FIELDS + ("output_dir",):
                value = getattr(cfg, name)
                if value is not None and not Path(value).is_absolute():
                    setattr(cfg, name, str((base_dir / value).resolve()))
        return cfg


def load_config(path) -> PipelineConfig:
    """Read a TOML config, or a manifest JSON written by a previous run."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    if path.suffix == ".json":
        data = fio.read_json(path)
        data = data.get("config", data)
    else:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    return PipelineConfig.from_mapping(data, path.parent.resolve())


@dataclass
class PipelineResult:
    output_dir: Path
    outputs: dict = field(default_factory=dict)
    selected_response: str | None = None
    warnings: list = field(default_factory=list)


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            log.info("stage %s", name)
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except (CountyRiskError, ValueError, ArithmeticError, OSError) as exc:
                raise StageError(name, exc) from exc
        return inner
    return wrap


def load_graph(adjacency=None, geojson=None, id_property="GEOID", extra_units=()):
    """Neighbour graph from an edge list (plus any extra units) or from polygons."""
    if adjacency is not None:
        units, edges = fio.read_edge_list(adjacency)
        units = sorted(set(units) | {str(u) for u in extra_units})
        return graph_from_edge_list(units, edges)
    polys = fio.read_geojson(geojson, id_property)
    graph = queen_from_polygons(polys)
    order = sorted(graph.unit_labels)
    return graph.subgraph(order)


def compute_exposure(units, polygons, tracks, events, grid, radius=DEFAULT_RADIUS,
                     threshold=DEFAULT_THRESHOLD, resolution=None, cutoff_year=DEFAULT_CUTOFF_YEAR):
    """Per-unit exposure covariates; returns ``(table, units_missing_last_event)``."""
    by_label: dict = {}
    for label, poly in polygons:
        by_label.setdefault(label, []).append(poly)
    table, missing = {}, []
    for unit in units:
        parts = by_label.get(unit)
        if not parts:
            raise InputError(f"no polygon for unit {unit}")
        wts = np.array([p.area for p in parts])
        wind = np.array([buffer_fraction(p, tracks, radius, resolution) for p in parts])
        surge = np.array([below_elevation_fraction(p, grid, threshold) for p in parts])
        last = last_event_covariates(events, unit, cutoff_year)
        if last.missing:
            missing.append(unit)
        table[unit] = {
            "wind_zone_frac": float(wts @ wind / wts.sum()),
            "surge_zone_frac": float(wts @ surge / wts.sum()),
            "last_max_wind": last.max_wind,
            "last_peak_surge": last.peak_surge,
        }
    return table, missing


def write_exposure(path, table):
    return fio.write_csv(path, ("county_fips",) + EXPOSURE_COLUMNS,
                         ([u] + [row[c] for c in EXPOSURE_COLUMNS] for u, row in table.items()))


def describe(columns: dict) -> list[dict]:
    """Mean, sd (n-1), min and max per variable."""
    out = []
    for name, vals in columns.items():
        v = np.asarray(vals, dtype=float)
        out.append({"variable": name, "mean": float(v.mean()), "sd": float(v.std(ddof=1)),
                    "min": float(v.min()), "max": float(v.max())})
    return out


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    try:
        config.validate()
    except InputError as exc:
        raise StageError("config", exc) from exc
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = PipelineResult(out)

    def emit(key, path):
        res.outputs[key] = Path(path).name

    # score
    @_stage("score")
    def stage_score():
        data = code_responses(fio.read_survey(config.survey))
        model = fit_paf(data, 1)
        scores = score(model, data)
        emit("factor_model", fio.write_json(out / "factor_model.json", model.to_dict()))
        emit("scores", fio.write_scores(out / "scores.csv", scores))
        res.warnings += [f"score: {w}" for w in model.warnings]
        return model, scores

    model, scores = stage_score()

    @_stage("aggregate")
    def stage_aggregate():
        aggs = aggregate_score_vector(scores)
        emit("aggregates", fio.write_aggregates(out / "aggregates.csv", aggs))
        return aggs

    aggs = stage_aggregate()

    @_stage("graph")
    def stage_graph():
        graph = load_graph(config.adjacency, config.geojson, config.id_property,
                           extra_units=[a.unit_label for a in aggs])
        emit("edges", fio.write_edge_list(out / "edges.csv", graph))
        aligned, absent = align_to_units(aggs, graph.unit_labels)
        if absent:
            res.warnings.append(f"graph: units without respondents: {', '.join(absent)}")
        return graph, aligned

    graph, aligned = stage_graph()
    units = list(graph.unit_labels)
    w_row = weights(graph, "row_standardized")
    w_bin = weights(graph, "binary")

    @_stage("moran")
    def stage_moran():
        y = np.array([a.mean for a in aligned])
        if np.any(np.isnan(y)):
            raise InputError("units without respondents have no mean; cannot test autocorrelation")
        return moran_mc(y, w_row, config.permutations, config.seed, config.workers)

    moran_raw = stage_moran()

    @_stage("car")
    def stage_car():
        variances = None
        if config.use_srs_variance:
            variances = np.array([a.srs_variance for a in aligned])
        names = RESPONSES if config.response == "auto" else (config.response,)
        fits = {}
        for name in names:
            y = np.array([a.response(name) for a in aligned])
            fits[name] = fit_car(y, w_bin, CarOptions(variances=variances))
        sel = select_response(fits)
        rows = []
        for name, fit in fits.items():
            y = np.array([a.response(name) for a in aligned])
            rows += [(u, name, raw, sm) for u, raw, sm in zip(units, y, fit.smoothed)]
        emit("smoothed", fio.write_csv(out / "smoothed.csv", ("county_fips", "response_name", "raw", "smoothed"), rows))
        report = {
            "fits": {name: fit.to_dict() for name, fit in fits.items()},
            "selection": {"selected": sel.best, "table": sel.table, "warnings": list(sel.warnings)},
            "use_srs_variance": config.use_srs_variance,
        }
        emit("car_report", fio.write_json(out / "car_report.json", report))
        sel_warn = list(sel.warnings) if config.response == "auto" else []
        for name, fit in fits.items():
            res.warnings += [f"car[{name}]: {w}" for w in fit.warnings]
        res.warnings += [f"car: {w}" for w in sel_warn]
        return fits, sel.best

    fits, best = stage_car()
    res.selected_response = best
    smoothed = fits[best].smoothed

    @_stage("moran")
    def stage_moran_smoothed():
        m = moran_mc(smoothed, w_row, config.permutations, config.seed, config.workers)
        report = {"raw_mean": moran_raw.to_dict(), "smoothed": {**m.to_dict(), "response": best}}
        emit("moran", fio.write_json(out / "moran.json", report))
        emit("moran_plot", fio.write_csv(out / "moran_plot.csv", ("county_fips", "value", "spatial_lag"),
                                         zip(units, smoothed, m.lagged_values)))
        return m

    moran_smooth = stage_moran_smoothed()

    @_stage("covariates")
    def stage_covariates():
        header, rows = fio.read_table(config.covariates, ("county_fips",))
        cov_names = [h for h in header if h != "county_fips"]
        table = {r["county_fips"]: {c: r[c] for c in cov_names} for r in rows}
        if config.tracks is not None:
            polys = fio.read_geojson(config.geojson, config.id_property)
            expo, missing_last = compute_exposure(
                units, polys, fio.read_tracks(config.tracks), fio.read_events(config.events),
                fio.read_ascii_grid(config.elevation), config.radius, config.threshold,
                config.resolution, config.cutoff_year)
            emit("exposure", write_exposure(out / "exposure.csv", expo))
            if missing_last:
                raise InputError(f"no qualifying event since {config.cutoff_year} for unit(s): {', '.join(missing_last)}")
            for u in units:
                table.setdefault(u, {}).update(expo[u])
            cov_names = list(EXPOSURE_COLUMNS) + [c for c in cov_names if c not in EXPOSURE_COLUMNS]
        absent = [u for u in units if u not in table or any(table[u].get(c) in (None, "") for c in cov_names)]
        if absent:
            raise InputError(f"units missing covariates: {', '.join(absent)}")
        X = np.array([[float(table[u][c]) for c in cov_names] for u in units])
        return cov_names, X

    cov_names, X = stage_covariates()

    @_stage("regress")
    def stage_regress():
        response_name = f"risk_perception_{best}"
        y_std, x_std, record = standardize(smoothed, X, (response_name, *cov_names))
        design = np.column_stack([np.ones(len(units)), x_std])
        names = ("intercept", *cov_names)
        cfg = GibbsConfig(config.chains, config.burn, config.keep, config.thin, config.seed,
                          config.prior_sd, config.workers)
        post = gibbs_lm(y_std, design, cfg, names)
        diag = diagnose(post, y_std, design, config.seed)
        table = summarize(post, record)
        res.warnings += [f"regress: {w}" for w in post.warnings + diag.warnings]
        regression = {
            "coefficients": {c.name: {"mean": c.mean, "lo95": c.lo95, "hi95": c.hi95,
                                      "significant": c.significant, "rhat": c.rhat} for c in table},
            "sigma2": {"mean": float(post.sigma2.mean()), "rhat": post.rhat["sigma2"]},
            "bayes_p": diag.bayes_p,
            "dic": diag.dic,
            "p_d": diag.p_d,
            "standardization": {"names": list(record.names), "means": list(record.means), "sds": list(record.sds)},
            "config": cfg.to_dict(),
            "warnings": list(post.warnings + diag.warnings),
        }
        emit("regression", fio.write_json(out / "regression.json", regression))
        resid = y_std - design @ post.means
        emit("residuals", fio.write_csv(out / "residuals.csv", ("county_fips", "fitted", "residual"),
                                        zip(units, design @ post.means, resid)))
        if config.write_draws:
            emit("draws", write_draws(out / "draws.csv", post))
        descriptives = describe({response_name: smoothed, **{c: X[:, j] for j, c in enumerate(cov_names)}})
        report = {
            "descriptives": descriptives,
            "coefficients": [{"variable": c.name, "posterior_mean": c.mean, "lower_95": c.lo95,
                                     "upper_95": c.hi95} for c in table],
            "bayes_p": diag.bayes_p,
            "dic": diag.dic,
            "n": len(units),
            "moran_i": moran_smooth.i_statistic,
            "moran_p": moran_smooth.p_value,
            "selected_response": best,
        }
        emit("report", fio.write_json(out / "report.json", report))

    stage_regress()

    if config.geojson is not None:
        values = {u: {"risk_raw": a.mean, "risk_smoothed": float(s)} for u, a, s in zip(units, aligned, smoothed)}
        emit("choropleth", fio.augment_geojson(config.geojson, out / "choropleth.geojson", values, config.id_property))

    write_manifest(out / "manifest.json", config, res)
    return res


def write_draws(path, post):
    header = ("chain", "draw", *post.names, "sigma2")
    per = np.zeros_like(post.chain)
    for c in np.unique(post.chain):
        idx = np.flatnonzero(post.chain == c)
        per[idx] = np.arange(idx.size)
    rows = ([int(c), int(k), *b.tolist(), float(s)] for c, k, b, s in zip(post.chain, per, post.beta, post.sigma2))
    return fio.write_csv(path, header, rows)


def write_manifest(path, config: PipelineConfig, res: PipelineResult):
    inputs = {}
    for name in PipelineConfig.PATH_FIELDS:
        value = getattr(config, name)
        if value is not None:
            inputs[name] = {"path": str(Path(value).resolve()), "sha256": fio.sha256(value)}
    manifest = {
        "config": {k: v for k, v in config.to_dict().items() if k != "workers"},
        "inputs": inputs,
        "outputs": {k: {"file": v, "sha256": fio.sha256(res.output_dir / v)} for k, v in res.outputs.items()},
        "seed": config.seed,
        "selected_response": res.selected_response,
        "warnings": res.warnings,
        "versions": {"countyrisk": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }
    fio.write_json(path, manifest)
    res.outputs["manifest"] = Path(path).name
