"""Command-line interface: one subcommand per stage plus ``run`` and ``simulate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as fio
from .aggregate import aggregate_scores
from .bayes import GibbsConfig, diagnose, gibbs_lm, standardize, summarize
from .car import CarOptions, fit_car, select_response
from .errors import CountyRiskError, InputError
from .factor import code_responses, fit_paf, score
from .graph import weights
from .moran import moran_mc
from .pipeline import (RESPONSES, PipelineConfig, StageError, compute_exposure, load_config,
                       load_graph, run_pipeline, write_draws, write_exposure)
from .synth import RESILIENCE, build_fixture

log = logging.getLogger("countyrisk")


def _report(args, payload):
    if getattr(args, "report", None):
        fio.write_json(args.report, payload)
    return payload


def _graph_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--adjacency", help="edge-list CSV (fips_a, fips_b)")
    g.add_argument("--geojson", help="GeoJSON FeatureCollection of unit polygons")
    p.add_argument("--id-property", default="GEOID", help="feature property holding the unit code")


def cmd_score(args):
    data = code_responses(fio.read_survey(args.survey))
    model = fit_paf(data, args.factors)
    scores = score(model, data)
    fio.write_scores(args.out, scores)
    if args.model_out:
        fio.write_json(args.model_out, model.to_dict())
    _report(args, {"n_respondents": len(data.respondent_ids), "n_scored": len(scores.respondent_ids),
                   "loadings": model.loadings, "communalities": model.communalities,
                   "eigenvalues": model.eigenvalues, "proportion_variance": model.proportion_variance,
                   "warnings": list(model.warnings)})


def cmd_aggregate(args):
    units, vals = fio.read_scores(args.scores)
    aggs = aggregate_scores(units, vals)
    fio.write_aggregates(args.out, aggs)
    _report(args, {"n_units": len(aggs), "n_respondents": int(vals.size),
                   "min_n": min(a.n for a in aggs), "max_n": max(a.n for a in aggs)})


def cmd_graph(args):
    graph = load_graph(args.adjacency, args.geojson, args.id_property)
    if args.out:
        fio.write_edge_list(args.out, graph)
    _report(args, {"n_units": graph.n, "n_edges": graph.n_edges, "mean_degree": graph.mean_degree,
                   "min_degree": int(graph.degrees.min()), "max_degree": int(graph.degrees.max())})


def _read_values(path, column, response=None):
    header, rows = fio.read_table(path, ("county_fips",))
    if "response_name" in header:
        names = sorted({r["response_name"] for r in rows})
        if response is None:
            if len(names) > 1:
                raise InputError(f"{path} holds responses {names}; pick one with --response")
            response = names[0]
        rows = [r for r in rows if r["response_name"] == response]
    if column is None:
        column = "smoothed" if "smoothed" in header else "mean"
    if column not in header:
        raise InputError(f"{path} has no column {column!r}")
    return {r["county_fips"]: float(r[column]) for r in rows}


def cmd_moran(args):
    values = _read_values(args.input, args.column, args.response)
    if args.adjacency or args.geojson:
        graph = load_graph(args.adjacency, args.geojson, args.id_property)
    else:
        raise InputError("moran needs --adjacency or --geojson")
    missing = [u for u in graph.unit_labels if u not in values]
    if missing:
        raise InputError(f"no value for unit(s): {', '.join(missing)}")
    y = np.array([values[u] for u in graph.unit_labels])
    res = moran_mc(y, weights(graph, args.weights), args.perms, args.seed, args.workers)
    if args.plot_out:
        fio.write_csv(args.plot_out, ("county_fips", "value", "spatial_lag"), zip(graph.unit_labels, y, res.lagged_values))
    payload = res.to_dict()
    print(fio.dumps(payload), end="")
    _report(args, payload)


def cmd_smooth(args):
    aggs = {a.unit_label: a for a in fio.read_aggregates(args.aggregates)}
    graph = load_graph(args.adjacency, args.geojson, args.id_property)
    missing = [u for u in graph.unit_labels if u not in aggs or aggs[u].missing]
    if missing:
        raise InputError(f"no aggregate for unit(s): {', '.join(missing)}; drop or impute them upstream")
    aligned = [aggs[u] for u in graph.unit_labels]
    w = weights(graph, "binary")
    variances = np.array([a.srs_variance for a in aligned]) if args.use_srs_variance else None
    names = RESPONSES if args.response == "auto" else (args.response,)
    fits = {n: fit_car(np.array([a.response(n) for a in aligned]), w, CarOptions(variances=variances)) for n in names}
    sel = select_response(fits)
    rows = []
    for n, fit in fits.items():
        rows += [(u, n, a.response(n), s) for u, a, s in zip(graph.unit_labels, aligned, fit.smoothed)]
    fio.write_csv(args.out, ("county_fips", "response_name", "raw", "smoothed"), rows)
    payload = {"fits": {n: f.to_dict() for n, f in fits.items()}, "aic_table": sel.table,
               "selected": sel.best, "warnings": list(sel.warnings) if len(names) > 1 else []}
    print(fio.dumps({"selected": sel.best, "aic": {r["response"]: r["aic"] for r in sel.table}}), end="")
    _report(args, payload)


def cmd_exposure(args):
    polys = fio.read_geojson(args.geojson, args.id_property)
    units = sorted({label for label, _ in polys})
    table, missing = compute_exposure(units, polys, fio.read_tracks(args.tracks), fio.read_events(args.events),
                                      fio.read_ascii_grid(args.elevation), args.radius, args.threshold,
                                      args.resolution, args.cutoff_year)
    write_exposure(args.out, table)
    _report(args, {"n_units": len(units), "missing_last_event": missing, "radius": args.radius,
                   "threshold": args.threshold, "cutoff_year": args.cutoff_year})


def cmd_regress(args):
    header, rows = fio.read_table(args.data, ("county_fips", args.response))
    predictors = args.predictors or [h for h in header if h not in ("county_fips", args.response)]
    try:
        y = np.array([float(r[args.response]) for r in rows])
        X = np.array([[float(r[c]) for c in predictors] for r in rows])
    except ValueError as exc:
        raise InputError(f"{args.data}: non-numeric or missing value ({exc}); drop the unit upstream") from None
    y_std, x_std, record = standardize(y, X, (args.response, *predictors))
    design = np.column_stack([np.ones(y.size), x_std])
    cfg = GibbsConfig(args.chains, args.burn, args.keep, args.thin, args.seed, args.prior_sd, args.workers)
    post = gibbs_lm(y_std, design, cfg, ("intercept", *predictors))
    diag = diagnose(post, y_std, design, args.seed)
    table = summarize(post, record)
    if args.draws_out:
        write_draws(args.draws_out, post)
    payload = {
        "coefficients": {c.name: {"mean": c.mean, "lo95": c.lo95, "hi95": c.hi95, "significant": c.significant,
                                  "rhat": c.rhat} for c in table},
        "bayes_p": diag.bayes_p, "dic": diag.dic, "p_d": diag.p_d,
        "config": cfg.to_dict(), "warnings": list(post.warnings + diag.warnings),
    }
    print(fio.dumps(payload), end="")
    _report(args, payload)


def write_fixture(out_dir, seed: int) -> dict:
    """Write the complete synthetic fixture set and a starter config."""
    out = Path(out_dir)
    fx = build_fixture(seed)
    paths = {
        "survey": fio.write_survey(out / "survey.csv", fx.survey_rows),
        "adjacency": fio.write_edge_list(out / "adjacency.csv", fx.graph),
        "geojson": fio.write_json(out / "counties.geojson", fio.polygons_to_geojson(fx.polygons)),
        "covariates": fio.write_csv(out / "covariates.csv", ("county_fips",) + RESILIENCE,
                                    ([u, *(fx.covariates[u][c] for c in RESILIENCE)] for u in fx.graph.unit_labels)),
        "tracks": fio.write_tracks(out / "tracks.csv", fx.tracks),
        "events": fio.write_events(out / "events.csv", fx.events),
        "elevation": fio.write_ascii_grid(out / "elevation.asc", fx.elevation),
        "truth": fio.write_json(out / "truth.json", fx.truth),
    }
    config = "\n".join([
        "# synthetic fixture pipeline config; paths are relative to this file",
        "[inputs]",
        'survey = "survey.csv"',
        'geojson = "counties.geojson"',
        'covariates = "covariates.csv"',
        'tracks = "tracks.csv"',
        'events = "events.csv"',
        'elevation = "elevation.asc"',
        "",
        "[car]",
        'response = "auto"',
        "",
        "[moran]",
        "permutations = 999",
        "",
        "[exposure]",
        "radius = 50.0",
        "threshold = 35.0",
        "resolution = 0.5",
        "cutoff_year = 1992",
        "",
        "[gibbs]",
        "chains = 4",
        "burn = 1000",
        "keep = 10000",
        "",
        "[run]",
        f"seed = {seed}",
        'output_dir = "out"',
        "",
    ])
    paths["config"] = fio.atomic_write(out / "pipeline.toml", config)
    return {k: str(v) for k, v in paths.items()}


def cmd_simulate(args):
    paths = write_fixture(args.out_dir, args.seed)
    _report(args, {"seed": args.seed, "files": paths})


def cmd_run(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = PipelineConfig()
    for name in ("survey", "adjacency", "geojson", "covariates", "tracks", "events", "elevation", "response",
                 "permutations", "seed", "output_dir", "workers", "chains", "burn", "keep", "radius",
                 "threshold", "resolution"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if args.draws:
        cfg.write_draws = True
    res = run_pipeline(cfg)
    payload = {"output_dir": str(res.output_dir), "outputs": res.outputs,
               "selected_response": res.selected_response, "warnings": res.warnings}
    _report(args, payload)
    for w in res.warnings:
        log.warning(w)
    print(f"pipeline finished: {len(res.outputs)} files in {res.output_dir}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="countyrisk", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--report", help="write a JSON report to this path")
        return p

    p = add("score", cmd_score, "fit the factor model and score respondents")
    p.add_argument("--survey", required=True)
    p.add_argument("--out", required=True, help="scores CSV")
    p.add_argument("--model-out", help="factor model JSON")
    p.add_argument("--factors", type=int, default=1)

    p = add("aggregate", cmd_aggregate, "aggregate normalized scores to units")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)

    p = add("graph", cmd_graph, "build the neighbour graph")
    _graph_args(p)
    p.add_argument("--out", help="canonical edge-list CSV")

    p = add("moran", cmd_moran, "Moran's I with a permutation p-value")
    p.add_argument("--input", required=True, help="CSV with county_fips and a value column")
    p.add_argument("--column", help="value column (default: smoothed, else mean)")
    p.add_argument("--response", help="response_name to select from a smoothed CSV")
    p.add_argument("--adjacency")
    p.add_argument("--geojson")
    p.add_argument("--id-property", default="GEOID")
    p.add_argument("--weights", default="row", choices=["row", "binary"])
    p.add_argument("--perms", type=int, default=999)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--plot-out", help="CSV of (value, spatial lag) pairs")

    p = add("smooth", cmd_smooth, "CAR smoothing and response selection")
    p.add_argument("--aggregates", required=True)
    _graph_args(p)
    p.add_argument("--response", default="auto", choices=[*RESPONSES, "auto"])
    p.add_argument("--use-srs-variance", action="store_true")
    p.add_argument("--out", required=True)

    p = add("exposure", cmd_exposure, "hurricane exposure covariates")
    p.add_argument("--geojson", required=True)
    p.add_argument("--id-property", default="GEOID")
    p.add_argument("--tracks", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--elevation", required=True)
    p.add_argument("--radius", type=float, default=50.0)
    p.add_argument("--threshold", type=float, default=35.0)
    p.add_argument("--resolution", type=float)
    p.add_argument("--cutoff-year", type=int, default=1992)
    p.add_argument("--out", required=True)

    p = add("regress", cmd_regress, "Bayesian linear regression by Gibbs sampling")
    p.add_argument("--data", required=True, help="CSV with county_fips, response and predictors")
    p.add_argument("--response", required=True)
    p.add_argument("--predictors", nargs="*")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--burn", type=int, default=1000)
    p.add_argument("--keep", type=int, default=10000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--prior-sd", type=float, default=100.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--draws-out", help="CSV of kept draws")

    p = add("simulate", cmd_simulate, "write a synthetic fixture set")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, required=True)

    p = add("run", cmd_run, "run the whole pipeline")
    p.add_argument("--config", help="TOML config or a previous run's manifest.json")
    for name in ("survey", "adjacency", "geojson", "covariates", "tracks", "events", "elevation"):
        p.add_argument(f"--{name}")
    p.add_argument("--response", choices=[*RESPONSES, "auto"])
    p.add_argument("--permutations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--burn", type=int)
    p.add_argument("--keep", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--resolution", type=float)
    p.add_argument("--draws", action="store_true", help="also write draws.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return 2
    except (CountyRiskError, OSError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
