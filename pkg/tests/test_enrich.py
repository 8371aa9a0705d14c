import datetime as dt
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evacuscope.enrich import (ELEVATION_BINS, TractAttributes, assign_elevation, assign_zone, build_contexts,
                               elevation_bin, elevation_bins, join_tract, load_tracts, tract_polygons)
from evacuscope.geo import ElevationGrid, ZonePolygon


def _square(x0, y0, x1, y1):
    return [np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)]


ZONES = [
    ZonePolygon(12, "voluntary", dt.date(2017, 9, 7), "C12", _square(-82.0, 27.0, -81.0, 28.0)),
    ZonePolygon(7, "mandatory", dt.date(2017, 9, 8), "C07", _square(-83.0, 27.0, -82.0, 28.0)),
]


def test_home_inside_mandatory_zone():
    z = assign_zone((27.5, -82.5), ZONES)
    assert (z.order_type, z.order_date, z.zone_id, z.ambiguous) == ("mandatory", dt.date(2017, 9, 8), 7, False)


def test_home_outside_all_zones():
    z = assign_zone((30.0, -82.5), ZONES)
    assert (z.order_type, z.order_date, z.zone_id) == ("none", None, None)


def test_shared_edge_goes_to_lowest_zone_id():
    z = assign_zone((27.5, -82.0), ZONES)
    assert z.zone_id == 7 and z.ambiguous
    z = assign_zone((27.5, -82.0), list(reversed(ZONES)))
    assert z.zone_id == 7


@pytest.mark.parametrize("e,b", [(6, 0), (-1, 0), (9.999, 0), (10, 1), (50, 1), (50.0001, 2), (102, 2)])
def test_elevation_bin_boundaries(e, b):
    assert elevation_bin(e) == b
    assert ELEVATION_BINS[b] in ("<10m", "10-50m", ">50m")


@given(st.floats(-500, 9000, allow_nan=False))
def test_elevation_bin_is_total_and_vectorised_agrees(e):
    b = elevation_bin(e)
    assert (b == 0) == (e < 10) and (b == 1) == (10 <= e <= 50) and (b == 2) == (e > 50)
    assert elevation_bins(np.array([e]))[0] == b


def test_assign_elevation_with_nodata():
    g = ElevationGrid(-83.0, 27.0, 0.5, np.array([[6.0, -9999.0], [10.0, 51.0]]))
    assert assign_elevation((27.25, -82.75), g) == (10.0, 1)
    assert assign_elevation((27.75, -82.75), g) == (6.0, 0)
    assert assign_elevation((27.75, -82.25), g) == (None, None)
    assert assign_elevation((26.0, -82.25), g) == (None, None)


def _tract_fixture(tmp_path):
    p = tmp_path / "tracts.csv"
    p.write_text("tract_id,median_age,median_income,vehicle_availability_pct,race_white_frac\n"
                 "001,40.5,54000,95.1,0.8\n002,33.0,,90.0,0.6\n003,60.0,120000,99.0,0.9\n")
    polys = tract_polygons([("001", _square(-83, 27, -82.5, 28)), ("002", _square(-82.5, 27, -82, 28)),
                            ("003", _square(-82, 27, -81.5, 28))])
    return load_tracts(p), polys


def test_join_tract(tmp_path):
    tracts, polys = _tract_fixture(tmp_path)
    t = join_tract((27.5, -82.7), tracts, polys)
    assert t == TractAttributes("001", 40.5, 54000.0, 95.1, 0.8) and t.complete
    t = join_tract((27.5, -82.2), tracts, polys)
    assert t.tract_id == "002" and math.isnan(t.median_income) and not t.complete
    assert join_tract((29.0, -82.2), tracts, polys) is None


def test_build_contexts_counts(tmp_path):
    tracts, polys = _tract_fixture(tmp_path)
    homes = pd.DataFrame({"device_id": ["a", "b", "c", "d", "e"],
                          "home_lat": [27.5, 27.5, 27.5, 29.0, 27.5],
                          "home_lon": [-82.7, -82.2, -81.7, -82.7, -82.0]})
    grid = ElevationGrid(-83.5, 26.5, 0.5, np.full((4, 5), 4.0))
    df, stats = build_contexts(homes, ZONES, grid, tracts, polys)
    assert list(df.device_id) == list("abcde")
    assert list(df.order_type) == ["mandatory", "mandatory", "voluntary", "none", "mandatory"]
    assert df.order_date.isna().tolist() == [False, False, False, True, False]
    # e sits on the 002/003 edge and takes the lower id, like join_tract
    assert list(df.tract_id) == ["001", "002", "003", None, "002"]
    assert list(df.tract_complete) == [True, False, True, False, False]
    assert stats["missing_tract"] == 1 and stats["incomplete_tract"] == 2
    assert stats["ambiguous_zone"] == 1 and stats["no_zone"] == 1
    # exclusions plus modelled devices account for everyone
    assert stats["missing_tract"] + stats["incomplete_tract"] + int(df.tract_complete.sum()) == stats["devices"]


def test_sidecar_join(tmp_path):
    tracts, _ = _tract_fixture(tmp_path)
    homes = pd.DataFrame({"device_id": ["a", "b"], "home_lat": [27.5, 27.5], "home_lon": [-82.7, -82.2]})
    side = pd.DataFrame({"device_id": ["b", "a"], "tract_id": ["003", "001"]})
    grid = ElevationGrid(-83.5, 26.5, 0.5, np.full((4, 5), 4.0))
    df, _ = build_contexts(homes, ZONES, grid, tracts, sidecar=side)
    assert list(df.tract_id) == ["001", "003"] and df.tract_complete.all()


def test_synthetic_devices_land_in_planted_tract_zone_and_bin():
    from evacuscope.geo import load_polygons  # noqa: F401  (same reader the pipeline uses)
    from evacuscope.geo import _geometry_rings
    from evacuscope.synth import GROUPS, ScenarioConfig, elevation_grid, plan_population, tracts_frame, zones_geojson
    cfg = ScenarioConfig.from_dict({"devices": 400, "seed": 3})
    plans = plan_population(cfg)
    frame, geo = tracts_frame(cfg)
    tracts = {r.tract_id: TractAttributes(r.tract_id, r.median_age, r.median_income, r.vehicle_availability_pct,
                                          r.race_white_frac) for r in frame.itertuples(index=False)}
    polys = tract_polygons([(f["properties"]["tract_id"], _geometry_rings(f["geometry"])) for f in geo["features"]])
    zones = [ZonePolygon(f["properties"]["zone_id"], f["properties"]["order_type"],
                         dt.date.fromisoformat(f["properties"]["order_date"]) if f["properties"]["order_date"] else None,
                         f["properties"]["county"], _geometry_rings(f["geometry"])) for f in zones_geojson()["features"]]
    homes = pd.DataFrame({"device_id": [p.device_id for p in plans], "home_lat": [p.home[0] for p in plans],
                          "home_lon": [p.home[1] for p in plans]})
    df, stats = build_contexts(homes, zones, elevation_grid(), tracts, polys)
    assert list(df.tract_id) == [p.tract for p in plans]
    assert list(df.order_type) == [GROUPS[p.group] for p in plans]
    assert list(df.elevation_bin) == [p.elev_bin for p in plans]
    assert stats["ambiguous_zone"] == 0 and stats["no_zone"] == 0
