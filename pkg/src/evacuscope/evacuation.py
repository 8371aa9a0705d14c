"""Daily home-distance series, activity filter and evacuation spell detection."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geo import METERS_PER_MILE
from .ingest import DeviceTrajectory, Shard, day_number, local_day_index


@dataclass
class DailyDistanceSeries:
    """Per-day minimum home distance over a month; NaN marks a day without sightings."""

    device_id: str
    first_day: dt.date
    min_distance_m: np.ndarray

    def __len__(self) -> int:
        return self.min_distance_m.shape[0]

    def date(self, i: int) -> dt.date:
        return self.first_day + dt.timedelta(days=int(i))

    def index_of(self, d: dt.date) -> int:
        return (d - self.first_day).days


@dataclass
class EvacuationProfile:
    device_id: str
    active: bool
    evacuated: bool = False
    departure_date: dt.date | None = None
    reentry_date: dt.date | None = None
    duration_days: int | None = None
    shelter_distance_mi: float | None = None


def _month_days(month: tuple[dt.date, dt.date]) -> int:
    return (month[1] - month[0]).days + 1


def daily_min_distance(traj: DeviceTrajectory, home, month: tuple[dt.date, dt.date]) -> DailyDistanceSeries:
    n_days = _month_days(month)
    out = np.full(n_days, np.nan)
    day = traj.day - day_number(month[0])
    sel = (day >= 0) & (day < n_days)
    if sel.any():
        d = kernels.haversine_to_point(np.ascontiguousarray(traj.lat[sel]), np.ascontiguousarray(traj.lon[sel]),
                                       float(home[0]), float(home[1]))
        np.fmin.at(out, day[sel], d)
    return DailyDistanceSeries(traj.device_id, month[0], out)


def shard_daily_min(shard: Shard, home_lat: np.ndarray, home_lon: np.ndarray,
                    month: tuple[dt.date, dt.date]) -> np.ndarray:
    """(devices x days) minimum home distance in metres for a whole shard.

    ``home_lat``/``home_lon`` are per device in shard order; NaN homes give NaN
    rows.
    """
    n_days = _month_days(month)
    out = np.full((shard.n_devices, n_days), np.nan)
    if len(shard) == 0:
        return out
    cols = shard.columns
    codes = shard.device_codes
    day = local_day_index(cols["timestamp"], cols["tz_offset_s"]) - day_number(month[0])
    sel = (day >= 0) & (day < n_days) & ~np.isnan(home_lat[codes])
    rows = np.flatnonzero(sel)
    if rows.size == 0:
        return out
    key = codes[rows] * n_days + day[rows]
    if np.any(np.diff(key) < 0):
        rows = rows[np.argsort(key, kind="stable")]
        key = codes[rows] * n_days + day[rows]
    dist = kernels.haversine_pairs(np.ascontiguousarray(cols["lat"][rows]), np.ascontiguousarray(cols["lon"][rows]),
                                   home_lat[codes[rows]], home_lon[codes[rows]])
    groups, starts = np.unique(key, return_index=True)
    out.reshape(-1)[groups] = kernels.group_min(dist, starts.astype(np.int64))
    return out


def activity_check(series: DailyDistanceSeries, threshold_mi: float = 1.0) -> bool:
    """True iff some observed day comes within the threshold of home."""
    d = series.min_distance_m
    return bool(np.any(d[~np.isnan(d)] <= threshold_mi * METERS_PER_MILE))


def away_spells(min_distance_m: np.ndarray, threshold_m: float) -> list[tuple[int, int]]:
    """Maximal runs [start, end] (inclusive) of days that are absent or beyond the threshold."""
    at_home = ~np.isnan(min_distance_m) & (np.nan_to_num(min_distance_m, nan=np.inf) <= threshold_m)
    spells = []
    start = None
    for i, home in enumerate(at_home):
        if not home and start is None:
            start = i
        elif home and start is not None:
            spells.append((start, i - 1))
            start = None
    if start is not None:
        spells.append((start, len(at_home) - 1))
    return spells


def detect_evacuation(series: DailyDistanceSeries, study_window: tuple[dt.date, dt.date],
                      threshold_mi: float = 1.0) -> EvacuationProfile:
    """Earliest away-spell with an observed away day that overlaps the window.

    Departure is the at-home day just before the spell and reentry the
    at-home day just after it; either is None when the spell touches the
    month edge. Inactive devices are returned unflagged.
    """
    active = activity_check(series, threshold_mi)
    prof = EvacuationProfile(series.device_id, active)
    if not active:
        return prof
    d = series.min_distance_m
    n = len(d)
    w0 = series.index_of(study_window[0])
    w1 = series.index_of(study_window[1])
    for start, end in away_spells(d, threshold_mi * METERS_PER_MILE):
        observed = d[start:end + 1]
        observed = observed[~np.isnan(observed)]
        if observed.size == 0 or end < w0 or start > w1:
            continue
        prof.evacuated = True
        if start > 0:
            prof.departure_date = series.date(start - 1)
        if end < n - 1:
            prof.reentry_date = series.date(end + 1)
        if prof.departure_date is not None and prof.reentry_date is not None:
            prof.duration_days = (prof.reentry_date - prof.departure_date).days
        prof.shelter_distance_mi = float(observed.max() / METERS_PER_MILE)
        break
    return prof


def profile_device(traj: DeviceTrajectory, home, month: tuple[dt.date, dt.date],
                   study_window: tuple[dt.date, dt.date], threshold_mi: float = 1.0) -> EvacuationProfile:
    series = daily_min_distance(traj, home, month)
    return detect_evacuation(series, study_window, threshold_mi)
