"""Home location from baseline-month night sightings."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InsufficientData
from .ingest import DeviceTrajectory, SECONDS_PER_DAY, day_number

NOISE = -1


@dataclass
class HomeParams:
    eps_m: float = 150.0
    min_pts: int = 5
    night_start_s: int = 19 * 3600
    night_end_s: int = 7 * 3600


@dataclass
class HomeEstimate:
    device_id: str
    lat: float
    lon: float
    night_sighting_count: int
    cluster_count: int
    winning_cluster_size: int

    @property
    def confidence(self) -> float:
        return self.winning_cluster_size / self.night_sighting_count

    @property
    def home(self) -> tuple[float, float]:
        return self.lat, self.lon


def night_mask(traj: DeviceTrajectory, month: tuple[dt.date, dt.date],
               params: HomeParams | None = None) -> np.ndarray:
    params = params or HomeParams()
    local = traj.local_seconds
    clock = local % SECONDS_PER_DAY
    day = local // SECONDS_PER_DAY
    in_month = (day >= day_number(month[0])) & (day <= day_number(month[1]))
    return in_month & ((clock >= params.night_start_s) | (clock < params.night_end_s))


def night_window(traj: DeviceTrajectory, month: tuple[dt.date, dt.date],
                 params: HomeParams | None = None) -> DeviceTrajectory:
    """Sightings at local 19:00 <= t or t < 07:00 on days of ``month``."""
    return traj.select(night_mask(traj, month, params))


def dbscan(lat, lon, eps_m: float, min_pts: int) -> np.ndarray:
    """DBSCAN with the haversine metric; noise is labelled -1.

    Clusters are numbered in the order a sequential index scan discovers them,
    and a border point within reach of several clusters joins the first.
    """
    if not eps_m > 0:
        raise ValueError("eps_m must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    return kernels.dbscan_labels(np.asarray(lat, dtype=np.float64), np.asarray(lon, dtype=np.float64),
                                 float(eps_m), int(min_pts))


def pick_cluster(labels: np.ndarray) -> int:
    """Largest cluster; ties go to the one whose earliest member comes first."""
    members = labels[labels != NOISE]
    sizes = np.bincount(members)
    best = np.flatnonzero(sizes == sizes.max())
    if best.size == 1:
        return int(best[0])
    first_seen = [int(np.flatnonzero(labels == c)[0]) for c in best]
    return int(best[int(np.argmin(first_seen))])


def infer_home(traj: DeviceTrajectory, month: tuple[dt.date, dt.date],
               params: HomeParams | None = None) -> HomeEstimate:
    params = params or HomeParams()
    night = night_window(traj, month, params)
    n = len(night)
    if n < params.min_pts:
        raise InsufficientData(f"{traj.device_id}: {n} night sightings < min_pts={params.min_pts}")
    labels = dbscan(night.lat, night.lon, params.eps_m, params.min_pts)
    if np.all(labels == NOISE):
        raise InsufficientData(f"{traj.device_id}: all night sightings are noise")
    win = pick_cluster(labels)
    sel = labels == win
    return HomeEstimate(traj.device_id, float(night.lat[sel].mean()), float(night.lon[sel].mean()),
                        n, int(labels.max()) + 1, int(sel.sum()))
