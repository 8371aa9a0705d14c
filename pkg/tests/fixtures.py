"""Small builders shared by the unit tests."""
from __future__ import annotations

import datetime as dt

import numpy as np

from evacuscope.ingest import DeviceTrajectory, day_number

TZ = -14400


def local_ts(day: dt.date, seconds: float | np.ndarray, tz: int = TZ):
    """UTC timestamp of local ``seconds`` after midnight on ``day``."""
    return (day_number(day) * 86400 + np.asarray(seconds, dtype=np.int64)) - tz


def make_traj(ts, lat, lon, tz: int = TZ, device_id: str = "d") -> DeviceTrajectory:
    ts = np.asarray(ts, dtype=np.int64)
    order = np.argsort(ts, kind="stable")
    n = ts.shape[0]
    return DeviceTrajectory(device_id, ts[order],
                            np.broadcast_to(np.asarray(lat, dtype=np.float64), (n,))[order].copy(),
                            np.broadcast_to(np.asarray(lon, dtype=np.float64), (n,))[order].copy(),
                            np.full(n, 5.0), np.full(n, tz, dtype=np.int64), np.ones(n, dtype=np.int64))


def offset(lat0: float, lon0: float, north_m: float, east_m: float) -> tuple[float, float]:
    """Small-displacement offset on the 6371 km sphere."""
    dlat = np.degrees(north_m / 6_371_000.0)
    dlon = np.degrees(east_m / (6_371_000.0 * np.cos(np.radians(lat0))))
    return lat0 + dlat, lon0 + dlon
