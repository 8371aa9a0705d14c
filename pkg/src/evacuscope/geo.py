"""Geometry shared by every stage: distances, local projection, hulls,
point-in-polygon and gridded elevation lookup.
"""
from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .kernels import EARTH_RADIUS_M

METERS_PER_MILE = 1609.344
ORDER_TYPES = ("none", "voluntary", "mandatory")
_PIP_TOL = 1e-12


class GeoPoint(NamedTuple):
    lat: float
    lon: float


def haversine_m(a: Sequence[float], b: Sequence[float]) -> float:
    """Great-circle distance in metres between two (lat, lon) points."""
    p1, p2 = math.radians(a[0]), math.radians(b[0])
    s_lat = math.sin((p2 - p1) / 2.0)
    s_lon = math.sin(math.radians(b[1] - a[1]) / 2.0)
    h = s_lat * s_lat + math.cos(p1) * math.cos(p2) * s_lon * s_lon
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))


def project_local(lat, lon, origin: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Equirectangular projection around ``origin``; returns (x, y) in km."""
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    r_km = EARTH_RADIUS_M / 1000.0
    x = r_km * np.radians(lon - origin[1]) * math.cos(math.radians(origin[0]))
    y = r_km * np.radians(lat - origin[0])
    return x, y


def convex_hull(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Counter-clockwise hull vertices of a planar point set.

    Duplicates are merged and collinear boundary points dropped, so a set of
    identical points gives a one-vertex hull and a collinear set gives its two
    extreme points.
    """
    pts = np.column_stack([np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)])
    if pts.shape[0] == 0:
        raise ValueError("convex_hull needs at least one point")
    pts = np.unique(pts, axis=0)  # lexicographic by (x, y)
    xs = np.ascontiguousarray(pts[:, 0])
    ys = np.ascontiguousarray(pts[:, 1])
    idx = kernels.monotone_chain(xs, ys)
    return xs[idx], ys[idx]


def hull_area_perimeter(hx, hy) -> tuple[float, float]:
    """Shoelace area and ring perimeter of a hull from :func:`convex_hull`.

    Degenerate hulls have zero area; a two-point hull is treated as an
    out-and-back path, so its perimeter is twice the segment length.
    """
    hx = np.asarray(hx, dtype=np.float64)
    hy = np.asarray(hy, dtype=np.float64)
    n = hx.shape[0]
    if n <= 1:
        return 0.0, 0.0
    if n == 2:
        return 0.0, 2.0 * float(math.hypot(hx[1] - hx[0], hy[1] - hy[0]))
    nx = np.roll(hx, -1)
    ny = np.roll(hy, -1)
    area = 0.5 * abs(float(np.dot(hx, ny) - np.dot(nx, hy)))
    perimeter = float(np.hypot(nx - hx, ny - hy).sum())
    return area, perimeter


# --------------------------------------------------------------------------
# zones


@dataclass
class ZonePolygon:
    zone_id: int
    order_type: str = "none"
    order_date: dt.date | None = None
    county: str | None = None
    rings: list[np.ndarray] = field(default_factory=list)  # each (m, 2) as (lon, lat), closed

    def __post_init__(self):
        if self.order_type not in ORDER_TYPES:
            raise ValueError(f"unknown order_type {self.order_type!r}")
        closed = []
        for ring in self.rings:
            ring = np.asarray(ring, dtype=np.float64)
            if ring.shape[0] and not np.array_equal(ring[0], ring[-1]):
                ring = np.vstack([ring, ring[:1]])
            closed.append(ring)
        self.rings = closed
        packed = np.vstack(closed) if closed else np.empty((0, 2))
        self._rx = np.ascontiguousarray(packed[:, 0])
        self._ry = np.ascontiguousarray(packed[:, 1])
        self._starts = np.cumsum([0] + [r.shape[0] for r in closed[:-1]]).astype(np.int64)
        if packed.shape[0]:
            self.bbox = (packed[:, 1].min(), packed[:, 0].min(), packed[:, 1].max(), packed[:, 0].max())
        else:
            self.bbox = (np.inf, np.inf, -np.inf, -np.inf)

    @property
    def order_code(self) -> int:
        return ORDER_TYPES.index(self.order_type)

    def contains(self, lat, lon) -> np.ndarray:
        """Vectorised boundary-inclusive even-odd test."""
        lat = np.atleast_1d(np.asarray(lat, dtype=np.float64))
        lon = np.atleast_1d(np.asarray(lon, dtype=np.float64))
        out = np.zeros(lat.shape[0], dtype=bool)
        if self._rx.shape[0] == 0:
            return out
        min_lat, min_lon, max_lat, max_lon = self.bbox
        cand = np.flatnonzero((lat >= min_lat - _PIP_TOL) & (lat <= max_lat + _PIP_TOL)
                              & (lon >= min_lon - _PIP_TOL) & (lon <= max_lon + _PIP_TOL))
        if cand.size:
            out[cand] = kernels.points_in_rings(
                np.ascontiguousarray(lon[cand]), np.ascontiguousarray(lat[cand]),
                self._rx, self._ry, self._starts, _PIP_TOL)
        return out


def point_in_polygon(p: Sequence[float], poly: ZonePolygon) -> bool:
    """True when (lat, lon) ``p`` lies inside ``poly`` or on its boundary."""
    return bool(poly.contains(p[0], p[1])[0])


def _geometry_rings(geom: dict) -> list[np.ndarray]:
    if geom["type"] == "Polygon":
        return [np.asarray(r, dtype=np.float64) for r in geom["coordinates"]]
    if geom["type"] == "MultiPolygon":
        return [np.asarray(r, dtype=np.float64) for poly in geom["coordinates"] for r in poly]
    raise ValueError(f"unsupported geometry type {geom['type']!r}")


def load_zones(path: str | Path) -> list[ZonePolygon]:
    """Read a GeoJSON-style FeatureCollection of evacuation zones."""
    doc = json.loads(Path(path).read_text())
    zones = []
    for feat in doc["features"]:
        props = feat.get("properties") or {}
        date = props.get("order_date")
        zones.append(ZonePolygon(
            zone_id=int(props["zone_id"]),
            order_type=props.get("order_type") or "none",
            order_date=dt.date.fromisoformat(date) if date else None,
            county=props.get("county"),
            rings=_geometry_rings(feat["geometry"]),
        ))
    zones.sort(key=lambda z: z.zone_id)
    return zones


def load_polygons(path: str | Path, key: str) -> list[tuple[str, list[np.ndarray]]]:
    """Read (feature[key], rings) pairs from a GeoJSON-style file."""
    doc = json.loads(Path(path).read_text())
    return [(str(f["properties"][key]), _geometry_rings(f["geometry"])) for f in doc["features"]]


# --------------------------------------------------------------------------
# elevation


@dataclass
class ElevationGrid:
    """Row-major raster; row 0 is the northern edge (ESRI ASCII grid layout)."""

    xllcorner: float
    yllcorner: float
    cellsize: float
    values: np.ndarray
    nodata: float = -9999.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("elevation grid must be 2-D")
        if not self.cellsize > 0:
            raise ValueError("cellsize must be positive")

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    def cell_center(self, row: int, col: int) -> GeoPoint:
        lat = self.yllcorner + (self.nrows - row - 0.5) * self.cellsize
        lon = self.xllcorner + (col + 0.5) * self.cellsize
        return GeoPoint(lat, lon)

    def sample(self, lat, lon) -> np.ndarray:
        """Nearest-cell elevation; NaN outside the grid or on no-data cells."""
        lat = np.atleast_1d(np.asarray(lat, dtype=np.float64))
        lon = np.atleast_1d(np.asarray(lon, dtype=np.float64))
        col = np.floor((lon - self.xllcorner) / self.cellsize).astype(np.int64)
        row_s = np.floor((lat - self.yllcorner) / self.cellsize).astype(np.int64)
        ok = (col >= 0) & (col < self.ncols) & (row_s >= 0) & (row_s < self.nrows)
        out = np.full(lat.shape[0], np.nan)
        vals = self.values[self.nrows - 1 - row_s[ok], col[ok]]
        vals[vals == self.nodata] = np.nan
        out[ok] = vals
        return out


def elevation_at(p: Sequence[float], grid: ElevationGrid) -> float | None:
    """Elevation in metres at (lat, lon) ``p``, or None for no-data."""
    v = grid.sample(p[0], p[1])[0]
    return None if np.isnan(v) else float(v)


def load_elevation_grid(path: str | Path) -> ElevationGrid:
    header = {}
    with open(path) as fh:
        for _ in range(6):
            key, val = fh.readline().split()
            header[key.lower()] = float(val)
        values = np.loadtxt(fh, ndmin=2)
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    if values.shape != (nrows, ncols):
        raise ValueError(f"grid body is {values.shape}, header says {(nrows, ncols)}")
    return ElevationGrid(header["xllcorner"], header["yllcorner"], header["cellsize"],
                         values, header.get("nodata_value", -9999.0))


def write_elevation_grid(grid: ElevationGrid, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"ncols {grid.ncols}\nnrows {grid.nrows}\n")
        fh.write(f"xllcorner {grid.xllcorner!r}\nyllcorner {grid.yllcorner!r}\n")
        fh.write(f"cellsize {grid.cellsize!r}\nnodata_value {grid.nodata!r}\n")
        np.savetxt(fh, grid.values, fmt="%.3f")
