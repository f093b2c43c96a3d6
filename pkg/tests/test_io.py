import math

import numpy as np
import pytest

from countyrisk import io as fio
from countyrisk.aggregate import CountyAggregate
from countyrisk.errors import InputError
from countyrisk.exposure import ElevationGrid, EventRecord, Track
from countyrisk.geometry import Polygon, box


def test_fmt_round_trips_floats():
    for v in (0.1, 1 / 3, 1e-300, -2.5e17):
        assert float(fio.fmt(v)) == v
    assert fio.fmt(math.nan) == ""
    assert fio.fmt(np.int64(3)) == "3"


def test_json_nan_becomes_null(tmp_path):
    fio.write_json(tmp_path / "a.json", {"x": math.nan, "y": np.array([1.0, np.inf])})
    assert fio.read_json(tmp_path / "a.json") == {"x": None, "y": [1.0, None]}


def test_missing_file_named(tmp_path):
    with pytest.raises(InputError, match="nope.csv"):
        fio.read_survey(tmp_path / "nope.csv")


def test_missing_column_named(tmp_path):
    (tmp_path / "s.csv").write_text("respondent_id,county_fips,q_number\n")
    with pytest.raises(InputError, match="q_strength"):
        fio.read_survey(tmp_path / "s.csv")


def test_aggregates_round_trip(tmp_path):
    aggs = [CountyAggregate("01001", 3, 0.5, 0.4, 0.6, 0.01 / 3), CountyAggregate.absent("01003")]
    fio.write_aggregates(tmp_path / "a.csv", aggs)
    back = fio.read_aggregates(tmp_path / "a.csv")
    assert back[0] == aggs[0]
    assert back[1].missing


def test_edge_list_blank_declares_unit(tmp_path):
    (tmp_path / "e.csv").write_text("fips_a,fips_b\nA,B\nC,\n")
    units, edges = fio.read_edge_list(tmp_path / "e.csv")
    assert units == ["A", "B", "C"]
    assert edges == [("A", "B")]


def test_geojson_multipolygon(tmp_path):
    doc = {"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"GEOID": "01"},
         "geometry": {"type": "MultiPolygon", "coordinates": [
             [[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]],
             [[[3, 0], [4, 0], [4, 1], [3, 1], [3, 0]], [[3.2, 0.2], [3.8, 0.2], [3.8, 0.8], [3.2, 0.8], [3.2, 0.2]]],
         ]}},
    ]}
    fio.write_json(tmp_path / "g.geojson", doc)
    parts = fio.read_geojson(tmp_path / "g.geojson")
    assert [p[0] for p in parts] == ["01", "01"]
    assert parts[1][1].area == pytest.approx(1 - 0.36)


def test_geojson_round_trip(tmp_path):
    polys = [("a", box(0, 0, 1, 1)), ("b", Polygon([(1, 0), (2, 0), (1.5, 1)]))]
    fio.write_json(tmp_path / "g.geojson", fio.polygons_to_geojson(polys))
    back = fio.read_geojson(tmp_path / "g.geojson")
    for (la, pa), (lb, pb) in zip(polys, back):
        assert la == lb
        np.testing.assert_array_equal(pa.exterior, pb.exterior)


def test_tracks_and_events_round_trip(tmp_path):
    tracks = [Track("H1", "1990-09-01", [(0.0, 0.0), (1.5, 2.25), (3.0, 1.0)])]
    events = [EventRecord("E1", "2005-08-29", ("a", "b"), 120.0, 17.5, "tide")]
    fio.write_tracks(tmp_path / "t.csv", tracks)
    fio.write_events(tmp_path / "e.csv", events)
    (t,) = fio.read_tracks(tmp_path / "t.csv")
    np.testing.assert_array_equal(t.vertices, tracks[0].vertices)
    assert fio.read_events(tmp_path / "e.csv") == events


def test_ascii_grid_round_trip(tmp_path):
    grid = ElevationGrid((10.0, -5.0), 0.5, np.array([[1.0, 2.5, -9999.0], [0.1, 0.2, 0.3]]))
    fio.write_ascii_grid(tmp_path / "g.asc", grid)
    back = fio.read_ascii_grid(tmp_path / "g.asc")
    assert back.origin == grid.origin and back.cell_size == grid.cell_size and back.nodata == grid.nodata
    np.testing.assert_array_equal(back.values, grid.values)


def test_ascii_grid_size_mismatch(tmp_path):
    (tmp_path / "g.asc").write_text("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n")
    with pytest.raises(InputError):
        fio.read_ascii_grid(tmp_path / "g.asc")


def test_atomic_write_leaves_no_temp(tmp_path):
    fio.atomic_write(tmp_path / "x.txt", "hello")
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]
