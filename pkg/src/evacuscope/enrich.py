"""Attach evacuation zone, elevation and census-tract attributes to homes."""
from __future__ import annotations

import datetime as dt
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .geo import ElevationGrid, ZonePolygon

ELEVATION_BINS = ("<10m", "10-50m", ">50m")
TRACT_FIELDS = ("median_age", "median_income", "vehicle_availability_pct", "race_white_frac")


def elevation_bin(elevation_m: float) -> int:
    """0 below 10 m, 1 for 10 to 50 m inclusive, 2 above 50 m."""
    if elevation_m < 10.0:
        return 0
    if elevation_m <= 50.0:
        return 1
    return 2


def elevation_bins(elevation_m: np.ndarray) -> np.ndarray:
    e = np.asarray(elevation_m, dtype=np.float64)
    out = np.where(e < 10.0, 0, np.where(e <= 50.0, 1, 2)).astype(np.float64)
    out[np.isnan(e)] = np.nan
    return out


@dataclass
class TractAttributes:
    tract_id: str
    median_age: float
    median_income: float
    vehicle_availability_pct: float
    race_white_frac: float

    @property
    def complete(self) -> bool:
        return not any(math.isnan(getattr(self, f)) for f in TRACT_FIELDS)


@dataclass
class ZoneAssignment:
    order_type: str
    order_date: dt.date | None
    zone_id: int | None
    county: str | None
    ambiguous: bool = False


def assign_zone(home: Sequence[float], zones: Sequence[ZonePolygon]) -> ZoneAssignment:
    """Zone containing ``home``; shared boundaries go to the lowest zone_id."""
    hits = [z for z in zones if z.contains(home[0], home[1])[0]]
    if not hits:
        return ZoneAssignment("none", None, None, None)
    z = min(hits, key=lambda z: z.zone_id)
    return ZoneAssignment(z.order_type, z.order_date, z.zone_id, z.county, len(hits) > 1)


def assign_zones(lat: np.ndarray, lon: np.ndarray, zones: Sequence[ZonePolygon]) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`assign_zone`: (index into ``zones`` or -1, hit count)."""
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    best = np.full(lat.shape[0], -1, dtype=np.int64)
    hits = np.zeros(lat.shape[0], dtype=np.int64)
    order = sorted(range(len(zones)), key=lambda i: zones[i].zone_id)
    for i in order:
        inside = zones[i].contains(lat, lon)
        hits += inside
        best[inside & (best == -1)] = i
    return best, hits


def assign_elevation(home: Sequence[float], grid: ElevationGrid) -> tuple[float | None, int | None]:
    e = grid.sample(home[0], home[1])[0]
    if np.isnan(e):
        return None, None
    return float(e), elevation_bin(float(e))


def load_tracts(path: str | Path) -> dict[str, TractAttributes]:
    df = pd.read_csv(path, dtype={"tract_id": str})
    out = {}
    for row in df.itertuples(index=False):
        out[row.tract_id] = TractAttributes(row.tract_id, *(float(getattr(row, f)) for f in TRACT_FIELDS))
    return out


def join_tract(home: Sequence[float], tracts: dict[str, TractAttributes],
               polygons: Sequence[tuple[str, ZonePolygon]]) -> TractAttributes | None:
    """Tract attributes of the first polygon (by tract_id) containing ``home``."""
    for tract_id, poly in sorted(polygons, key=lambda t: t[0]):
        if poly.contains(home[0], home[1])[0]:
            return tracts.get(tract_id)
    return None


def tract_polygons(pairs) -> list[tuple[str, ZonePolygon]]:
    """Wrap (tract_id, rings) pairs from :func:`geo.load_polygons` as polygons."""
    return [(tid, ZonePolygon(zone_id=i, rings=rings)) for i, (tid, rings) in enumerate(sorted(pairs))]


def build_contexts(homes: pd.DataFrame, zones: Sequence[ZonePolygon], grid: ElevationGrid,
                   tracts: dict[str, TractAttributes],
                   polygons: Sequence[tuple[str, ZonePolygon]] | None = None,
                   sidecar: pd.DataFrame | None = None) -> tuple[pd.DataFrame, dict]:
    """One context row per device in ``homes`` (columns device_id, home_lat, home_lon).

    Tracts come from point-in-polygon when ``polygons`` is given, otherwise
    from a device_id -> tract_id ``sidecar``.
    """
    lat = homes["home_lat"].to_numpy(dtype=np.float64)
    lon = homes["home_lon"].to_numpy(dtype=np.float64)
    n = lat.shape[0]
    stats = Counter()

    zi, hits = assign_zones(lat, lon, zones)
    stats["ambiguous_zone"] = int((hits > 1).sum())
    stats["no_zone"] = int((zi == -1).sum())
    order_type = np.array([zones[i].order_type if i >= 0 else "none" for i in zi], dtype=object)
    order_date = [zones[i].order_date.isoformat() if i >= 0 and zones[i].order_date else None for i in zi]
    county = [zones[i].county if i >= 0 and zones[i].county else "unassigned" for i in zi]
    zone_id = [zones[i].zone_id if i >= 0 else None for i in zi]

    elev = grid.sample(lat, lon)
    stats["no_elevation"] = int(np.isnan(elev).sum())

    tract_id = np.full(n, None, dtype=object)
    if polygons is not None:
        for tid, poly in sorted(polygons, key=lambda t: t[0], reverse=True):
            tract_id[poly.contains(lat, lon)] = tid
    elif sidecar is not None:
        lookup = dict(zip(sidecar["device_id"].astype(str), sidecar["tract_id"].astype(str)))
        tract_id = np.array([lookup.get(d) for d in homes["device_id"].astype(str)], dtype=object)
    attrs = {f: np.full(n, np.nan) for f in TRACT_FIELDS}
    for i, tid in enumerate(tract_id):
        t = tracts.get(tid) if tid is not None else None
        if t is None:
            continue
        for f in TRACT_FIELDS:
            attrs[f][i] = getattr(t, f)
    missing_tract = np.array([tid is None or tid not in tracts for tid in tract_id])
    complete = ~missing_tract & ~np.any([np.isnan(attrs[f]) for f in TRACT_FIELDS], axis=0)
    stats["missing_tract"] = int(missing_tract.sum())
    stats["incomplete_tract"] = int((~missing_tract & ~complete).sum())

    df = pd.DataFrame({
        "device_id": homes["device_id"].astype(str).to_numpy(),
        "county": county,
        "zone_id": pd.array(zone_id, dtype="Int64"),
        "order_type": order_type,
        "order_code": pd.array([("none", "voluntary", "mandatory").index(t) for t in order_type], dtype="int64"),
        "order_date": order_date,
        "elevation_m": elev,
        "elevation_bin": pd.array([None if np.isnan(b) else int(b) for b in elevation_bins(elev)], dtype="Int64"),
        "tract_id": tract_id,
        **attrs,
        "tract_complete": complete,
    })
    stats["devices"] = n
    return df, dict(stats)
