"""Pipeline configuration: a flat TOML file, every key optional except inputs.

Relative paths are resolved against the directory holding the config file.
``PipelineConfig()`` with only the four input paths reproduces the defaults
listed in the README.
"""
from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import InvalidConfig
from .ingest import IngestFilter, month_range

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

PATH_KEYS = ("sightings", "zones", "elevation", "tracts", "tract_polygons", "tract_sidecar", "out")


@dataclass
class PipelineConfig:
    sightings: Path | None = None
    zones: Path | None = None
    elevation: Path | None = None
    tracts: Path | None = None
    tract_polygons: Path | None = None     # GeoJSON of tract polygons keyed by tract_id
    tract_sidecar: Path | None = None      # or a device_id,tract_id CSV
    out: Path = Path("run")
    baseline_month: str = "2017-08"
    study_month: str = "2017-09"
    window_start: str = "2017-09-04"
    window_end: str = "2017-09-12"
    accuracy_max_m: float = 250.0
    bbox: list[float] | None = None        # min_lat, min_lon, max_lat, max_lon
    eps_m: float = 150.0
    min_pts: int = 5
    night_start_h: float = 19.0
    night_end_h: float = 7.0
    threshold_mi: float = 1.0
    roam_m: float = 300.0
    dwell_s: float = 300.0
    gap_s: float = 3600.0
    trips_denominator: str = "observed"
    distance_edges_mi: list[float] = field(default_factory=lambda: [1.0, 20.0, 40.0, 60.0, 80.0, 100.0])
    order_encoding: str = "numeric"
    shards: int = 0                        # 0 picks a count from the input size
    block_mb: int = 32
    jobs: int = 1

    # derived views -------------------------------------------------------

    @property
    def baseline(self) -> tuple[dt.date, dt.date]:
        return month_range(self.baseline_month)

    @property
    def study(self) -> tuple[dt.date, dt.date]:
        return month_range(self.study_month)

    @property
    def window(self) -> tuple[dt.date, dt.date]:
        return dt.date.fromisoformat(self.window_start), dt.date.fromisoformat(self.window_end)

    def ingest_filter(self) -> IngestFilter:
        return IngestFilter(self.accuracy_max_m, tuple(self.bbox) if self.bbox else None,
                            (self.baseline, self.study))

    def validate(self) -> "PipelineConfig":
        try:
            base, study, win = self.baseline, self.study, self.window
        except ValueError as e:
            raise InvalidConfig(f"bad date: {e}") from None
        if not (study[0] <= win[0] <= win[1] <= study[1]):
            raise InvalidConfig("study window must lie inside the study month")
        if base[1] >= study[0]:
            raise InvalidConfig("baseline month must precede the study month")
        for name in ("accuracy_max_m", "eps_m", "threshold_mi", "roam_m", "dwell_s", "gap_s", "block_mb"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be > 0")
        if self.min_pts < 1 or self.jobs < 1 or self.shards < 0:
            raise InvalidConfig("min_pts and jobs must be >= 1, shards >= 0")
        if not (0 <= self.night_end_h < self.night_start_h <= 24):
            raise InvalidConfig("night window must wrap midnight: 0 <= night_end_h < night_start_h <= 24")
        edges = self.distance_edges_mi
        if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])) or edges[0] <= 0:
            raise InvalidConfig("distance_edges_mi must be positive and increasing")
        if self.bbox is not None and len(self.bbox) != 4:
            raise InvalidConfig("bbox needs 4 numbers")
        if self.trips_denominator not in ("observed", "calendar"):
            raise InvalidConfig("trips_denominator must be 'observed' or 'calendar'")
        if self.order_encoding not in ("numeric", "dummies"):
            raise InvalidConfig("order_encoding must be 'numeric' or 'dummies'")
        return self

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise InvalidConfig(f"config is missing {', '.join(missing)}")

    def parameters(self) -> dict[str, Any]:
        """Every non-path setting, for the manifest."""
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in PATH_KEYS + ("jobs",)}

    @classmethod
    def from_dict(cls, d: dict[str, Any], base: Path | None = None) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for k in PATH_KEYS:
            if d.get(k) is not None:
                p = Path(d[k])
                d[k] = p if p.is_absolute() or base is None else base / p
        return cls(**d).validate()

    @classmethod
    def from_toml(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise InvalidConfig(f"cannot read {path}: {e}") from None
        return cls.from_dict(raw, path.parent)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes).validate()
