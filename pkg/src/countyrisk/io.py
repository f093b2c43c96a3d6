"""File formats: CSV tables, GeoJSON polygons, ASCII grids, JSON reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .aggregate import CountyAggregate
from .errors import InputError
from .exposure import ElevationGrid, EventRecord, Track
from .geometry import Polygon


def fmt(value) -> str:
    """Shortest round-trip text for numbers; empty string for missing."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "" if math.isnan(value) else repr(value)
    return str(value)


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return atomic_write(path, buf.getvalue())


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return None if not math.isfinite(obj) else obj
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _open_rows(path, required):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise InputError(f"{path}: missing column(s) {', '.join(missing)}")
        return header, list(reader)


def read_table(path, required=()):
    """Generic CSV reader returning ``(header, rows-as-dicts)``."""
    return _open_rows(path, required)


def _float(path, lineno, row, col) -> float:
    try:
        return float(row[col])
    except (TypeError, ValueError):
        raise InputError(f"{path}, line {lineno}: column {col} is not a number: {row[col]!r}") from None


# --- survey -----------------------------------------------------------------

SURVEY_ITEMS = ("q_number", "q_strength", "q_flooding")


def read_survey(path):
    _, rows = _open_rows(path, ("respondent_id", "county_fips") + SURVEY_ITEMS)
    return [(r["respondent_id"], r["county_fips"], [r[c] for c in SURVEY_ITEMS]) for r in rows]


def write_survey(path, raw_rows):
    return write_csv(path, ("respondent_id", "county_fips") + SURVEY_ITEMS,
                     ([rid, unit, *answers] for rid, unit, answers in raw_rows))


# --- scores and aggregates ----------------------------------------------------

def write_scores(path, scores):
    rows = zip(scores.respondent_ids, scores.unit_labels, scores.raw_scores, scores.normalized_scores)
    return write_csv(path, ("respondent_id", "county_fips", "raw_score", "normalized_score"), rows)


def read_scores(path):
    name = Path(path)
    _, rows = _open_rows(path, ("county_fips", "normalized_score"))
    units = [r["county_fips"] for r in rows]
    vals = np.array([_float(name, i + 2, r, "normalized_score") for i, r in enumerate(rows)])
    return units, vals


AGGREGATE_COLUMNS = ("county_fips", "n", "mean", "q1", "q3", "srs_variance")


def write_aggregates(path, aggregates):
    return write_csv(path, AGGREGATE_COLUMNS,
                     ((a.unit_label, a.n, a.mean, a.q1, a.q3, a.srs_variance) for a in aggregates))


def read_aggregates(path) -> list[CountyAggregate]:
    _, rows = _open_rows(path, AGGREGATE_COLUMNS)
    out = []
    for i, r in enumerate(rows):
        if r["mean"] == "":
            out.append(CountyAggregate.absent(r["county_fips"]))
            continue
        vals = [_float(path, i + 2, r, c) for c in AGGREGATE_COLUMNS[2:]]
        out.append(CountyAggregate(r["county_fips"], int(r["n"]), *vals))
    return out


# --- adjacency and polygons ---------------------------------------------------

def read_edge_list(path):
    """Edge-list CSV ``fips_a, fips_b``; a blank ``fips_b`` just declares a unit."""
    _, rows = _open_rows(path, ("fips_a", "fips_b"))
    units, edges = [], []
    for r in rows:
        a, b = r["fips_a"].strip(), (r["fips_b"] or "").strip()
        units.append(a)
        if b:
            units.append(b)
            edges.append((a, b))
    return sorted(set(units)), edges


def write_edge_list(path, graph):
    return write_csv(path, ("fips_a", "fips_b"), graph.edges())


def _polygon_from_coords(rings) -> Polygon:
    return Polygon(rings[0], tuple(rings[1:]))


def read_geojson(path, id_property: str = "GEOID"):
    """``(label, Polygon)`` pairs; MultiPolygon features yield one pair per part."""
    doc = read_json(path) if Path(path).is_file() else None
    if doc is None:
        raise InputError(f"input file not found: {path}")
    if doc.get("type") != "FeatureCollection":
        raise InputError(f"{path}: expected a GeoJSON FeatureCollection")
    out = []
    for k, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        if id_property not in props:
            raise InputError(f"{path}: feature {k} has no {id_property!r} property")
        label = str(props[id_property])
        geom = feat.get("geometry") or {}
        if geom.get("type") == "Polygon":
            out.append((label, _polygon_from_coords(geom["coordinates"])))
        elif geom.get("type") == "MultiPolygon":
            out.extend((label, _polygon_from_coords(part)) for part in geom["coordinates"])
        else:
            raise InputError(f"{path}: feature {label} has unsupported geometry {geom.get('type')!r}")
    return out


def polygons_to_geojson(polygons, id_property: str = "GEOID", properties=None) -> dict:
    properties = properties or {}
    feats = []
    for label, poly in polygons:
        rings = [r.tolist() for r in poly.rings]
        props = {id_property: label, **properties.get(label, {})}
        feats.append({"type": "Feature", "properties": props, "geometry": {"type": "Polygon", "coordinates": rings}})
    return {"type": "FeatureCollection", "features": feats}


def augment_geojson(src, dst, values: dict, id_property: str = "GEOID"):
    """Copy a FeatureCollection, adding ``values[label]`` to each feature's properties."""
    doc = read_json(src)
    for feat in doc.get("features", []):
        label = str((feat.get("properties") or {}).get(id_property))
        feat.setdefault("properties", {}).update(values.get(label, {}))
    return write_json(dst, doc)


# --- hazard inputs ------------------------------------------------------------

def read_tracks(path) -> list[Track]:
    _, rows = _open_rows(path, ("event_id", "date", "seq", "x", "y"))
    groups: dict[str, list] = {}
    dates = {}
    for i, r in enumerate(rows):
        eid = r["event_id"]
        groups.setdefault(eid, []).append((int(r["seq"]), _float(path, i + 2, r, "x"), _float(path, i + 2, r, "y")))
        dates.setdefault(eid, r["date"])
    tracks = []
    for eid, pts in groups.items():
        pts.sort()
        tracks.append(Track(eid, dates[eid], [(x, y) for _, x, y in pts]))
    return tracks


def write_tracks(path, tracks):
    rows = ((t.event_id, t.date.isoformat(), k, x, y) for t in tracks for k, (x, y) in enumerate(t.vertices.tolist()))
    return write_csv(path, ("event_id", "date", "seq", "x", "y"), rows)


EVENT_COLUMNS = ("event_id", "date", "county_fips", "max_wind_kt", "peak_surge_ft", "surge_or_tide")


def read_events(path) -> list[EventRecord]:
    _, rows = _open_rows(path, EVENT_COLUMNS)
    groups: dict[str, dict] = {}
    for i, r in enumerate(rows):
        g = groups.setdefault(r["event_id"], {
            "date": r["date"], "units": [],
            "wind": _float(path, i + 2, r, "max_wind_kt"),
            "surge": _float(path, i + 2, r, "peak_surge_ft"),
            "flag": r["surge_or_tide"].strip().lower(),
        })
        g["units"].append(r["county_fips"])
    return [EventRecord(eid, g["date"], g["units"], g["wind"], g["surge"], g["flag"]) for eid, g in groups.items()]


def write_events(path, events):
    rows = ((e.event_id, e.date.isoformat(), u, e.max_wind, e.peak_surge, e.surge_or_tide)
            for e in events for u in e.affected_units)
    return write_csv(path, EVENT_COLUMNS, rows)


def read_ascii_grid(path) -> ElevationGrid:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    header = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    k = 0
    while k < len(lines):
        parts = lines[k].split()
        if len(parts) == 2 and parts[0][0].isalpha():
            header[parts[0].lower()] = parts[1]
            k += 1
        else:
            break
    for key in ("ncols", "nrows", "cellsize"):
        if key not in header:
            raise InputError(f"{path}: ASCII grid header lacks {key}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    cs = float(header["cellsize"])
    if "xllcorner" in header:
        x0, y0 = float(header["xllcorner"]), float(header["yllcorner"])
    else:
        x0, y0 = float(header["xllcenter"]) - cs / 2, float(header["yllcenter"]) - cs / 2
    nodata = float(header.get("nodata_value", header.get("nodata", -9999)))
    values = np.array(" ".join(lines[k:]).split(), dtype=float)
    if values.size != ncols * nrows:
        raise InputError(f"{path}: expected {ncols * nrows} values, found {values.size}")
    return ElevationGrid((x0, y0), cs, values.reshape(nrows, ncols), nodata)


def write_ascii_grid(path, grid: ElevationGrid):
    lines = [
        f"ncols {grid.n_cols}",
        f"nrows {grid.n_rows}",
        f"xllcorner {fmt(float(grid.origin[0]))}",
        f"yllcorner {fmt(float(grid.origin[1]))}",
        f"cellsize {fmt(float(grid.cell_size))}",
        f"NODATA_value {fmt(float(grid.nodata))}",
    ]
    lines += [" ".join(fmt(float(v)) for v in row) for row in grid.values]
    return atomic_write(path, "\n".join(lines) + "\n")
