"""Synthetic sighting streams with full planted ground truth.

The world is a 4 x 3 degree box split into eight longitude columns (one
evacuation zone and county each) and three latitude bands whose elevation
ramps sit below 10 m, between 10 and 50 m, and above 50 m. Each column-band
cell holds four census tracts.

Population-level quantities (order group, elevation bin, evacuation decision,
departure date, duration, shelter-distance bin) are allocated by exact quota
and then shuffled, so planted shares match the configured targets to within
one device. Each device's trace comes from its own RNG stream seeded by
(seed, device index), so traces do not depend on generation order.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import pyarrow as pa
import pyarrow.csv as pacsv

from .errors import InvalidConfig
from .geo import METERS_PER_MILE, ElevationGrid, haversine_m, write_elevation_grid
from .ingest import COLUMNS, day_number, month_range
from .kernels import EARTH_RADIUS_M
from .parallel import map_ordered

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

GROUPS = ("none", "voluntary", "mandatory")
BINS = ("low", "mid", "high")
M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0

# world layout
LON0, LAT0 = -84.0, 26.0
COL_W, BAND_H = 0.5, 1.0
N_COLS, N_BANDS = 8, 3
COLUMN_ORDERS = ("none", "none", "none", "none", "voluntary", "voluntary", "mandatory", "mandatory")
COLUMN_DATES = (None, None, None, None, "2017-09-06", "2017-09-07", "2017-09-08", "2017-09-06")
BAND_ELEVATION = ((-1.0, 9.9), (10.0, 50.0), (50.1, 102.0))
GRID_CELL = 0.01
HOME_MARGIN = 0.02


@dataclass
class ScenarioConfig:
    seed: int = 42
    devices: int = 1000
    baseline_month: str = "2017-08"
    study_month: str = "2017-09"
    baseline_days: int = 31
    tz_offset_s: int = -14400
    noise_m: float = 50.0
    night_rate_per_h: float = 2.0
    day_cadence_s: int = 900
    move_cadence_s: int = 180
    speed_kmh: float = 30.0
    mobility: bool = True
    trip_choices: list[int] = field(default_factory=lambda: [0, 2, 3, 4, 5])
    trip_weights: list[float] = field(default_factory=lambda: [0.1, 0.35, 0.25, 0.2, 0.1])
    dropout_prob: float = 0.0
    order_shares: list[float] = field(default_factory=lambda: [0.703, 0.142, 0.155])
    elevation_shares: list[float] = field(default_factory=lambda: [0.6, 0.3, 0.1])
    # evacuation rate per order group (rows) and elevation bin (columns)
    evac_rate_none: list[float] = field(default_factory=lambda: [0.3659, 0.32, 0.2843])
    evac_rate_voluntary: list[float] = field(default_factory=lambda: [0.36, 0.33, 0.30])
    evac_rate_mandatory: list[float] = field(default_factory=lambda: [0.60, 0.57, 0.52])
    departure_dates: list[str] = field(default_factory=lambda: [
        "2017-09-03", "2017-09-04", "2017-09-05", "2017-09-06", "2017-09-07",
        "2017-09-08", "2017-09-09", "2017-09-10", "2017-09-11"])
    departure_weights: list[float] = field(default_factory=lambda: [
        0.04, 0.0628, 0.0704, 0.095, 0.14, 0.245, 0.2627, 0.0628, 0.0213])
    duration_choices: list[int] = field(default_factory=lambda: [2, 3, 4, 5, 6, 7, 8, 10, 14])
    duration_weights: list[float] = field(default_factory=lambda: [
        0.12, 0.2, 0.18, 0.14, 0.1, 0.08, 0.07, 0.06, 0.05])
    censored_share: float = 0.05
    shelter_edges_mi: list[float] = field(default_factory=lambda: [1, 20, 40, 60, 80, 100, 300])
    shelter_shares_none: list[float] = field(default_factory=lambda: [0.43, 0.15, 0.08, 0.06, 0.05, 0.23])
    shelter_shares_voluntary: list[float] = field(default_factory=lambda: [0.43, 0.15, 0.08, 0.06, 0.05, 0.23])
    shelter_shares_mandatory: list[float] = field(default_factory=lambda: [
        0.3547, 0.14, 0.08, 0.06, 0.05, 0.3153])
    missing_tract_frac: float = 0.0
    jobs: int = 1

    def validate(self) -> "ScenarioConfig":
        def probs(name, v, n=None):
            v = np.asarray(v, dtype=float)
            if n is not None and v.shape[0] != n:
                raise InvalidConfig(f"{name} needs {n} values")
            if np.any(v < 0) or np.any(v > 1):
                raise InvalidConfig(f"{name} must lie in [0, 1]")

        if self.devices < 1:
            raise InvalidConfig("devices must be >= 1")
        for name in ("dropout_prob", "censored_share", "missing_tract_frac"):
            probs(name, [getattr(self, name)])
        probs("order_shares", self.order_shares, 3)
        probs("elevation_shares", self.elevation_shares, 3)
        for g in GROUPS:
            probs(f"evac_rate_{g}", getattr(self, f"evac_rate_{g}"), 3)
            probs(f"shelter_shares_{g}", getattr(self, f"shelter_shares_{g}"), len(self.shelter_edges_mi) - 1)
        probs("trip_weights", self.trip_weights, len(self.trip_choices))
        probs("departure_weights", self.departure_weights, len(self.departure_dates))
        probs("duration_weights", self.duration_weights, len(self.duration_choices))
        if any(k == 1 or k < 0 for k in self.trip_choices):
            raise InvalidConfig("trip_choices must be 0 or >= 2 (days start and end at home)")
        if any(d < 2 for d in self.duration_choices):
            raise InvalidConfig("duration_choices must be >= 2 days")
        if not 1 <= self.baseline_days <= 31:
            raise InvalidConfig("baseline_days must be 1..31")
        if self.noise_m < 0 or self.night_rate_per_h <= 0 or self.day_cadence_s <= 0 or self.move_cadence_s <= 0:
            raise InvalidConfig("rates, cadences and noise must be positive")
        return self

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**d).validate()

    @classmethod
    def from_toml(cls, path: str | Path) -> "ScenarioConfig":
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))


# --------------------------------------------------------------------------
# helpers


def quota(n: int, weights) -> np.ndarray:
    """Largest-remainder integer allocation of ``n`` items to ``weights``."""
    w = np.asarray(weights, dtype=np.float64)
    if n == 0 or w.sum() == 0:
        return np.zeros(w.shape[0], dtype=np.int64)
    exact = n * w / w.sum()
    base = np.floor(exact).astype(np.int64)
    rem = n - base.sum()
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:rem]] += 1
    return base


def _allocate(rng: np.random.Generator, n: int, weights) -> np.ndarray:
    labels = np.repeat(np.arange(len(weights)), quota(n, weights))
    rng.shuffle(labels)
    return labels


def destination(lat: float, lon: float, bearing: float, dist_m: float) -> tuple[float, float]:
    """Point reached from (lat, lon) along a great circle."""
    p1 = math.radians(lat)
    d = dist_m / EARTH_RADIUS_M
    p2 = math.asin(math.sin(p1) * math.cos(d) + math.cos(p1) * math.sin(d) * math.cos(bearing))
    l2 = math.radians(lon) + math.atan2(math.sin(bearing) * math.sin(d) * math.cos(p1),
                                        math.cos(d) - math.sin(p1) * math.sin(p2))
    return math.degrees(p2), (math.degrees(l2) + 540.0) % 360.0 - 180.0


def ramp_elevation(lat) -> np.ndarray:
    """Planted elevation surface: linear ramp within each latitude band."""
    lat = np.asarray(lat, dtype=np.float64)
    band = np.clip(np.floor((lat - LAT0) / BAND_H).astype(int), 0, N_BANDS - 1)
    lo = np.array([b[0] for b in BAND_ELEVATION])[band]
    hi = np.array([b[1] for b in BAND_ELEVATION])[band]
    frac = np.clip((lat - (LAT0 + band * BAND_H)) / BAND_H, 0.0, 1.0)
    return lo + (hi - lo) * frac


def device_id_for(seed: int, i: int) -> str:
    return hashlib.md5(f"{seed}:{i}".encode()).hexdigest()[:31]


def tract_id(col: int, band: int, quad: int) -> str:
    return f"12{col:02d}{band}{quad}"


def tract_cell(col: int, band: int, quad: int) -> tuple[float, float, float, float]:
    """(min_lat, min_lon, max_lat, max_lon) of a tract."""
    qx, qy = quad % 2, quad // 2
    min_lon = LON0 + col * COL_W + qx * COL_W / 2
    min_lat = LAT0 + band * BAND_H + qy * BAND_H / 2
    return min_lat, min_lon, min_lat + BAND_H / 2, min_lon + COL_W / 2


def _rect(min_lat, min_lon, max_lat, max_lon) -> list[list[float]]:
    return [[min_lon, min_lat], [max_lon, min_lat], [max_lon, max_lat], [min_lon, max_lat], [min_lon, min_lat]]


# --------------------------------------------------------------------------
# population plan


@dataclass
class DevicePlan:
    index: int
    device_id: str
    device_type: int
    group: int
    elev_bin: int
    column: int
    tract: str
    home: tuple[float, float]
    evacuated: bool = False
    departure: dt.date | None = None
    reentry: dt.date | None = None
    shelter: tuple[float, float] | None = None
    shelter_distance_mi: float | None = None


def plan_population(cfg: ScenarioConfig) -> list[DevicePlan]:
    rng = np.random.default_rng([cfg.seed, 0xE7AC])
    n = cfg.devices
    group = _allocate(rng, n, cfg.order_shares)
    ebin = np.empty(n, dtype=np.int64)
    for g in range(3):
        idx = np.flatnonzero(group == g)
        ebin[idx] = _allocate(rng, idx.size, cfg.elevation_shares)

    plans = []
    for i in range(n):
        cols = [c for c in range(N_COLS) if COLUMN_ORDERS[c] == GROUPS[group[i]]]
        col = int(rng.choice(cols))
        quad = int(rng.integers(4))
        a, b, c, d = tract_cell(col, int(ebin[i]), quad)
        home = (float(rng.uniform(a + HOME_MARGIN, c - HOME_MARGIN)), float(rng.uniform(b + HOME_MARGIN, d - HOME_MARGIN)))
        plans.append(DevicePlan(i, device_id_for(cfg.seed, i), int(rng.integers(1, 3)), int(group[i]), int(ebin[i]),
                                col, tract_id(col, int(ebin[i]), quad), home))

    evac = np.zeros(n, dtype=bool)
    for g in range(3):
        rates = getattr(cfg, f"evac_rate_{GROUPS[g]}")
        for e in range(3):
            idx = np.flatnonzero((group == g) & (ebin == e))
            k = int(math.floor(rates[e] * idx.size + 0.5))
            evac[rng.permutation(idx)[:k]] = True

    ev_idx = np.flatnonzero(evac)
    dep_label = _allocate(rng, ev_idx.size, cfg.departure_weights)
    dur_w = list(np.asarray(cfg.duration_weights) * (1 - cfg.censored_share)) + [cfg.censored_share]
    dur_label = _allocate(rng, ev_idx.size, dur_w)
    first, last = month_range(cfg.study_month)
    for j, i in enumerate(ev_idx):
        p = plans[i]
        p.evacuated = True
        p.departure = dt.date.fromisoformat(cfg.departure_dates[dep_label[j]])
        if dur_label[j] < len(cfg.duration_choices):
            re = p.departure + dt.timedelta(days=int(cfg.duration_choices[dur_label[j]]))
            p.reentry = re if re <= last else None
    edges = cfg.shelter_edges_mi
    for g in range(3):
        idx = ev_idx[group[ev_idx] == g]
        labels = _allocate(rng, idx.size, getattr(cfg, f"shelter_shares_{GROUPS[g]}"))
        for i, b in zip(idx, labels):
            lo = max(edges[b] + 0.5, 2.5)
            hi = edges[b + 1] - 0.5
            dist_mi = float(rng.uniform(lo, hi))
            p = plans[i]
            p.shelter = destination(p.home[0], p.home[1], float(rng.uniform(0, 2 * math.pi)),
                                    dist_mi * METERS_PER_MILE)
            p.shelter_distance_mi = haversine_m(p.home, p.shelter) / METERS_PER_MILE
    return plans


# --------------------------------------------------------------------------
# traces


def _jitter(rng, lat, lon, noise_m):
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    if noise_m <= 0 or lat.size == 0:
        return lat, lon
    dy = rng.normal(0.0, noise_m, lat.shape) / M_PER_DEG
    dx = rng.normal(0.0, noise_m, lat.shape) / (M_PER_DEG * np.cos(np.radians(lat)))
    return lat + dy, lon + dx


def _night_times(rng, rate_per_h):
    """Poisson sighting times (local seconds of day) in [0, 7h) and [19h, 24h)."""
    n1 = rng.poisson(rate_per_h * 7)
    n2 = rng.poisson(rate_per_h * 5)
    t = np.concatenate([rng.uniform(0, 7 * 3600, n1), rng.uniform(19 * 3600, 24 * 3600, n2)])
    return np.floor(t).astype(np.int64)


def _cadence(t0, t1, step):
    return np.arange(int(t0), int(t1), int(step), dtype=np.int64)


def _anchors(rng, home, count):
    out = []
    base = rng.uniform(0, 2 * math.pi)
    for j in range(count):
        bearing = base + 2 * math.pi * j / max(count, 1)
        out.append(destination(home[0], home[1], bearing, float(rng.uniform(3000, 10000))))
    return out


def _trip_day(rng, cfg: ScenarioConfig, home, anchors, k):
    """Daytime (07:00-19:00) sightings for a day of ``k`` planted trips."""
    t_list, la_list, lo_list = [], [], []

    def stay(t0, t1, where):
        t = _cadence(t0, t1, cfg.day_cadence_s)
        t_list.append(t)
        la_list.append(np.full(t.size, where[0]))
        lo_list.append(np.full(t.size, where[1]))

    if k == 0:
        stay(7 * 3600, 19 * 3600, home)
        return t_list, la_list, lo_list
    stops = [home] + [anchors[j % len(anchors)] for j in range(k - 1)] + [home]
    t = 8 * 3600 + int(rng.integers(0, 1800))
    stay(7 * 3600, t + 1, home)
    speed = cfg.speed_kmh / 3.6
    for leg, (a, b) in enumerate(zip(stops[:-1], stops[1:])):
        travel = haversine_m(a, b) / speed
        mt = np.arange(cfg.move_cadence_s, travel, cfg.move_cadence_s)
        frac = mt / travel
        t_list.append((t + mt).astype(np.int64))
        la_list.append(a[0] + (b[0] - a[0]) * frac)
        lo_list.append(a[1] + (b[1] - a[1]) * frac)
        t = int(math.ceil(t + travel))
        if leg == k - 1:
            stay(t, 19 * 3600, home)
        else:
            dwell = int(rng.integers(40 * 60, 70 * 60))
            stay(t, t + dwell + 1, b)
            t += dwell
    return t_list, la_list, lo_list


def _device_trace(args) -> tuple[dict, dict]:
    cfg, p = args
    rng = np.random.default_rng([cfg.seed, p.index])
    anchors = _anchors(rng, p.home, 4)
    base0, _ = month_range(cfg.baseline_month)
    study0, study1 = month_range(cfg.study_month)
    days = [base0 + dt.timedelta(days=j) for j in range(cfg.baseline_days)]
    days += [study0 + dt.timedelta(days=j) for j in range((study1 - study0).days + 1)]
    spell = set()
    if p.evacuated:
        end = p.reentry if p.reentry is not None else study1 + dt.timedelta(days=1)
        d = p.departure + dt.timedelta(days=1)
        while d < end:
            spell.add(d)
            d += dt.timedelta(days=1)

    ts_parts, lat_parts, lon_parts = [], [], []
    base_trips, base_days = 0, 0
    for day in days:
        dropped = rng.random() < cfg.dropout_prob
        where = p.shelter if day in spell else p.home
        t_n = _night_times(rng, cfg.night_rate_per_h)
        t_list, la_list, lo_list = [t_n], [np.full(t_n.size, where[0])], [np.full(t_n.size, where[1])]
        k = 0
        if day in spell or not cfg.mobility:
            t = _cadence(7 * 3600, 19 * 3600, cfg.day_cadence_s)
            t_list.append(t)
            la_list.append(np.full(t.size, where[0]))
            lo_list.append(np.full(t.size, where[1]))
        else:
            k = int(rng.choice(cfg.trip_choices, p=np.asarray(cfg.trip_weights) / np.sum(cfg.trip_weights)))
            tt, ll, oo = _trip_day(rng, cfg, p.home, anchors, k)
            t_list += tt
            la_list += ll
            lo_list += oo
        t = np.concatenate(t_list)
        order = np.argsort(t, kind="stable")
        lat, lon = _jitter(rng, np.concatenate(la_list)[order], np.concatenate(lo_list)[order], cfg.noise_m)
        if dropped:
            continue
        if day.month == base0.month and day.year == base0.year:
            base_trips += k
            base_days += 1
        local0 = day_number(day) * 86400
        ts_parts.append(local0 + t[order] - cfg.tz_offset_s)
        lat_parts.append(lat)
        lon_parts.append(lon)

    ts = np.concatenate(ts_parts) if ts_parts else np.empty(0, dtype=np.int64)
    n = ts.shape[0]
    rows = {
        "timestamp": ts,
        "device_id": np.full(n, p.device_id, dtype=object),
        "device_type": np.full(n, p.device_type, dtype=np.int64),
        "lat": np.round(np.concatenate(lat_parts) if n else np.empty(0), 6),
        "lon": np.round(np.concatenate(lon_parts) if n else np.empty(0), 6),
        "accuracy_m": rng.choice(np.array([5.0, 10.0, 25.0, 50.0, 100.0]), n),
        "tz_offset_s": np.full(n, cfg.tz_offset_s, dtype=np.int64),
    }
    truth = {
        "device_id": p.device_id, "home_lat": p.home[0], "home_lon": p.home[1],
        "order_type": GROUPS[p.group], "elevation_bin": p.elev_bin, "county": f"C{p.column:02d}",
        "tract_id": p.tract, "evacuated": p.evacuated,
        "departure_date": p.departure.isoformat() if p.departure else None,
        "reentry_date": p.reentry.isoformat() if p.reentry else None,
        "duration_days": (p.reentry - p.departure).days if p.reentry and p.departure else None,
        "shelter_lat": p.shelter[0] if p.shelter else None,
        "shelter_lon": p.shelter[1] if p.shelter else None,
        "shelter_distance_mi": p.shelter_distance_mi,
        "baseline_days": base_days,
        "avg_daily_trips": base_trips / base_days if base_days else None,
        "sightings": n,
    }
    return rows, truth


# --------------------------------------------------------------------------
# reference files


def zones_geojson() -> dict:
    feats = []
    for c in range(N_COLS):
        rect = _rect(LAT0, LON0 + c * COL_W, LAT0 + N_BANDS * BAND_H, LON0 + (c + 1) * COL_W)
        feats.append({"type": "Feature",
                      "properties": {"zone_id": c + 1, "order_type": COLUMN_ORDERS[c],
                                     "order_date": COLUMN_DATES[c], "county": f"C{c:02d}"},
                      "geometry": {"type": "Polygon", "coordinates": [rect]}})
    return {"type": "FeatureCollection", "features": feats}


def elevation_grid() -> ElevationGrid:
    nrows = int(round(N_BANDS * BAND_H / GRID_CELL)) + 20
    ncols = int(round(N_COLS * COL_W / GRID_CELL)) + 20
    xll, yll = LON0 - 10 * GRID_CELL, LAT0 - 10 * GRID_CELL
    centers = yll + (nrows - np.arange(nrows) - 0.5) * GRID_CELL
    vals = np.repeat(np.round(ramp_elevation(centers), 3)[:, None], ncols, axis=1)
    return ElevationGrid(xll, yll, GRID_CELL, vals)


def tracts_frame(cfg: ScenarioConfig) -> tuple[pd.DataFrame, dict]:
    rng = np.random.default_rng([cfg.seed, 0x7AC7])
    recs, feats = [], []
    for c in range(N_COLS):
        for b in range(N_BANDS):
            for q in range(4):
                tid = tract_id(c, b, q)
                recs.append({"tract_id": tid,
                             "median_age": round(float(np.clip(rng.normal(41.4, 9.7), 12, 83)), 1),
                             "median_income": round(float(np.clip(rng.lognormal(math.log(54279), 0.35),
                                                                  8804, 250000)), 0),
                             "vehicle_availability_pct": round(float(np.clip(rng.normal(95, 4), 28.4, 100)), 1),
                             "race_white_frac": round(float(rng.beta(5, 1.2)), 3)})
                feats.append({"type": "Feature", "properties": {"tract_id": tid},
                              "geometry": {"type": "Polygon", "coordinates": [_rect(*tract_cell(c, b, q))]}})
    df = pd.DataFrame.from_records(recs)
    k = int(round(cfg.missing_tract_frac * len(df)))
    if k:
        df.loc[np.sort(rng.choice(len(df), k, replace=False)), "median_income"] = np.nan
    return df, {"type": "FeatureCollection", "features": feats}


PIPELINE_TEMPLATE = """\
# generated by `evacuscope synth`
sightings = "sightings.csv"
zones = "zones.geojson"
elevation = "elevation.asc"
tracts = "tracts.csv"
tract_polygons = "tracts.geojson"
out = "run"
baseline_month = "{baseline_month}"
study_month = "{study_month}"
"""


def _write_rows(rows: list[dict], path: Path, header: bool) -> None:
    cols = {c: np.concatenate([r[c] for r in rows]) for c in COLUMNS}
    table = pa.table({c: (pa.array(cols[c], type=pa.string()) if c == "device_id" else cols[c]) for c in COLUMNS})
    opts = pacsv.WriteOptions(include_header=False, quoting_style="none")
    with open(path, "ab") as fh:
        if header:
            fh.write((",".join(COLUMNS) + "\n").encode())
        pacsv.write_csv(table, fh, write_options=opts)


def generate(cfg: ScenarioConfig, out: str | Path, batch: int = 500) -> dict[str, Path]:
    """Write sightings, truth, zones, elevation and tract files under ``out``."""
    cfg.validate()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in ("sightings.csv", "truth.csv", "zones.geojson", "elevation.asc",
                                           "tracts.csv", "tracts.geojson", "pipeline.toml")}
    plans = plan_population(cfg)
    paths["sightings.csv"].unlink(missing_ok=True)
    truths = []
    for start in range(0, len(plans), batch):
        chunk = map_ordered(_device_trace, [(cfg, p) for p in plans[start:start + batch]], cfg.jobs)
        _write_rows([r for r, _ in chunk], paths["sightings.csv"], header=start == 0)
        truths += [t for _, t in chunk]

    tracts, tract_geo = tracts_frame(cfg)
    complete = set(tracts.dropna()["tract_id"])
    truth = pd.DataFrame.from_records(truths)
    truth["elevation_m"] = elevation_grid().sample(truth["home_lat"], truth["home_lon"])
    truth["tract_complete"] = truth["tract_id"].isin(complete)
    truth.to_csv(paths["truth.csv"], index=False)
    paths["zones.geojson"].write_text(json.dumps(zones_geojson(), indent=1) + "\n")
    write_elevation_grid(elevation_grid(), paths["elevation.asc"])
    tracts.to_csv(paths["tracts.csv"], index=False)
    paths["tracts.geojson"].write_text(json.dumps(tract_geo, indent=1) + "\n")
    paths["pipeline.toml"].write_text(PIPELINE_TEMPLATE.format(baseline_month=cfg.baseline_month,
                                                               study_month=cfg.study_month))
    return paths


# --------------------------------------------------------------------------
# bulk stream for throughput checks


def bulk_sightings(path: str | Path, n_records: int, n_devices: int, seed: int = 0,
                   month_first: dt.date = dt.date(2017, 8, 1), n_days: int = 61,
                   tz_offset_s: int = -14400, chunk: int = 2_000_000) -> None:
    """Fast vectorised stream of ``n_records`` sightings, devices interleaved.

    About 70 % of sightings sit near each device's home, the rest scatter up
    to ~40 km away. No ground truth; meant for throughput measurement.
    """
    rng = np.random.default_rng(seed)
    home_lat = rng.uniform(26.0, 29.0, n_devices)
    home_lon = rng.uniform(-84.0, -80.0, n_devices)
    ids = np.array([device_id_for(seed, i) for i in range(n_devices)], dtype=object)
    t0 = day_number(month_first) * 86400 - tz_offset_s
    path = Path(path)
    path.unlink(missing_ok=True)
    written = 0
    while written < n_records:
        m = min(chunk, n_records - written)
        dev = rng.integers(0, n_devices, m)
        away = rng.random(m) < 0.3
        spread = np.where(away, 0.35, 0.0006)
        lat = np.round(home_lat[dev] + rng.normal(0, 1, m) * spread, 6)
        lon = np.round(home_lon[dev] + rng.normal(0, 1, m) * spread, 6)
        rows = {
            "timestamp": t0 + rng.integers(0, n_days * 86400, m),
            "device_id": ids[dev],
            "device_type": np.ones(m, dtype=np.int64),
            "lat": lat, "lon": lon,
            "accuracy_m": rng.choice(np.array([5.0, 10.0, 25.0, 100.0]), m),
            "tz_offset_s": np.full(m, tz_offset_s, dtype=np.int64),
        }
        _write_rows([rows], path, header=written == 0)
        written += m
