"""Baseline-month mobility: recursive trip identification and daily hull footprint."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NoBaselineData
from .geo import convex_hull, hull_area_perimeter, project_local
from .ingest import DeviceTrajectory, day_from_number


@dataclass
class TripParams:
    roam_m: float = 300.0
    dwell_s: float = 300.0
    gap_s: float = 3600.0


@dataclass
class Staypoint:
    lat: float
    lon: float
    arrival: int
    departure: int
    n: int


@dataclass
class Trip:
    first: int   # index of the first sighting of the trip within the day
    last: int
    start_ts: int
    end_ts: int
    displacement_m: float


@dataclass
class MobilityBaseline:
    device_id: str
    avg_daily_trips: float
    avg_daily_hull_area_km2: float
    avg_daily_hull_perimeter_km: float
    observed_days: int
    hull_days: int


def find_staypoints(ts, lat, lon, roam_m: float, dwell_s: float) -> list[Staypoint]:
    ts = np.ascontiguousarray(ts, dtype=np.int64)
    lat = np.ascontiguousarray(lat, dtype=np.float64)
    lon = np.ascontiguousarray(lon, dtype=np.float64)
    starts, stops = kernels.staypoints(ts, lat, lon, float(roam_m), float(dwell_s))
    return [Staypoint(float(lat[a:b].mean()), float(lon[a:b].mean()), int(ts[a]), int(ts[b - 1]), int(b - a))
            for a, b in zip(starts, stops)]


def _dist(lat, lon, i, j) -> float:
    return float(kernels.haversine_pairs_np(lat[i], lon[i], lat[j], lon[j]))


def _split_gap(ts, lat, lon, a, b, p: TripParams) -> int | None:
    """Index after the longest qualifying silence in [a, b], if any."""
    if b <= a:
        return None
    gaps = np.diff(ts[a:b + 1])
    cand = np.flatnonzero(gaps > p.gap_s)
    best = None
    for c in cand[np.argsort(-gaps[cand], kind="stable")]:
        if _dist(lat, lon, a + c, a + c + 1) >= p.roam_m:
            best = a + c + 1
            break
    return best


def _trips_in(ts, lat, lon, lo, hi, p: TripParams, out: list[Trip]) -> None:
    starts, stops = kernels.staypoints(ts[lo:hi], lat[lo:hi], lon[lo:hi], float(p.roam_m), float(p.dwell_s))
    starts = starts + lo
    stops = stops + lo
    # moving pieces, each sharing its boundary sightings with the neighbouring stays
    pieces = []
    if starts.size == 0:
        pieces.append((lo, hi - 1))
    else:
        if starts[0] > lo:
            pieces.append((lo, starts[0]))
        for k in range(starts.size - 1):
            pieces.append((stops[k] - 1, starts[k + 1]))
        if stops[-1] < hi:
            pieces.append((stops[-1] - 1, hi - 1))
    for a, b in pieces:
        cut = _split_gap(ts, lat, lon, a, b, p)
        if cut is None:
            _emit(ts, lat, lon, a, b, p, out)
        else:
            # both sides are strictly shorter than [lo, hi), so this terminates
            _trips_in(ts, lat, lon, a, cut, p, out)
            _trips_in(ts, lat, lon, cut, b + 1, p, out)


def _emit(ts, lat, lon, a, b, p: TripParams, out: list[Trip]) -> None:
    if b - a + 1 < 2:
        return
    disp = _dist(lat, lon, a, b)
    if disp < p.roam_m:
        return
    out.append(Trip(a, b, int(ts[a]), int(ts[b]), disp))


def identify_trips(ts, lat, lon, params: TripParams | None = None) -> list[Trip]:
    """Trips in one day of time-sorted sightings.

    Staypoints are maximal runs within ``roam_m`` of their first sighting that
    last ``dwell_s``; the movement between them is a trip candidate. A
    candidate containing a silence longer than ``gap_s`` whose two sides are
    ``roam_m`` apart is cut there and each side is segmented again. Candidates
    with fewer than 2 sightings or less than ``roam_m`` net displacement are
    discarded.
    """
    p = params or TripParams()
    ts = np.ascontiguousarray(ts, dtype=np.int64)
    lat = np.ascontiguousarray(lat, dtype=np.float64)
    lon = np.ascontiguousarray(lon, dtype=np.float64)
    out: list[Trip] = []
    if ts.shape[0] >= 2:
        _trips_in(ts, lat, lon, 0, ts.shape[0], p, out)
    out.sort(key=lambda t: t.first)
    return out


def daily_hull_metrics(lat, lon) -> tuple[float, float] | None:
    """(area km^2, perimeter km) of a day's sightings, None under 3 distinct points."""
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    if np.unique(np.column_stack([lat, lon]), axis=0).shape[0] < 3:
        return None
    x, y = project_local(lat, lon, (float(lat.mean()), float(lon.mean())))
    return hull_area_perimeter(*convex_hull(x, y))


def daily_metrics(traj: DeviceTrajectory, month: tuple[dt.date, dt.date],
                  params: TripParams | None = None) -> list[tuple[dt.date, int, tuple[float, float] | None]]:
    """(day, trip count, hull metrics) for each observed day of ``month``."""
    p = params or TripParams()
    sub = traj.between(*month)
    days, order, starts = sub.day_groups()
    bounds = np.append(starts, order.shape[0])
    out = []
    for i, d in enumerate(days):
        idx = order[bounds[i]:bounds[i + 1]]
        ts, lat, lon = sub.timestamp[idx], sub.lat[idx], sub.lon[idx]
        out.append((day_from_number(d),
                    len(identify_trips(ts, lat, lon, p)), daily_hull_metrics(lat, lon)))
    return out


def baseline_summary(traj: DeviceTrajectory, month: tuple[dt.date, dt.date],
                     params: TripParams | None = None, denominator: str = "observed") -> MobilityBaseline:
    """Monthly averages of daily trips and hull metrics.

    Trips average over observed days (``denominator="calendar"`` divides by
    every day of the month instead); hull metrics average over days with a
    defined hull.
    """
    days = daily_metrics(traj, month, params)
    if not days:
        raise NoBaselineData(f"{traj.device_id}: no sightings in baseline month")
    trips = np.array([t for _, t, _ in days], dtype=np.float64)
    hulls = np.array([h for _, _, h in days if h is not None], dtype=np.float64).reshape(-1, 2)
    n_days = len(days) if denominator == "observed" else (month[1] - month[0]).days + 1
    if denominator not in ("observed", "calendar"):
        raise ValueError(f"unknown denominator {denominator!r}")
    area, perim = (hulls.mean(axis=0) if hulls.shape[0] else (np.nan, np.nan))
    return MobilityBaseline(traj.device_id, float(trips.sum() / n_days), float(area), float(perim),
                            len(days), int(hulls.shape[0]))
