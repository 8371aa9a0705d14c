"""Resumable pipeline stages with plain-file handoff.

Layout under the output directory::

    store/                 device-sharded parquet sightings + index.json   (ingest)
    homes.csv                                                             (homes)
    evacuation_profiles.csv                                               (evac)
    mobility_baseline.csv                                                 (mobility)
    device_context.csv                                                    (enrich)
    reports/*.csv                                                         (report)
    model_summary.json, model_summary.txt                                 (fit)
    stats/<stage>.json     inclusion/exclusion counters per stage
    manifest.json          input digests, parameters and output digests

Every file is written to a temporary name and renamed into place. Nothing in
the outputs depends on wall-clock time, worker count or backend, so reruns
with unchanged inputs reproduce them byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from collections import Counter
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from . import analytics, choice_model, enrich, evacuation, geo, homes, ingest, mobility
from .config import PipelineConfig
from .errors import InsufficientData, MissingArtifact, NoBaselineData
from .parallel import map_ordered

log = logging.getLogger(__name__)

STAGES = ("ingest", "homes", "evac", "mobility", "enrich", "report", "fit")

ARTIFACTS = {
    "ingest": "store/index.json",
    "homes": "homes.csv",
    "evac": "evacuation_profiles.csv",
    "mobility": "mobility_baseline.csv",
    "enrich": "device_context.csv",
    "report": "reports",
    "fit": "model_summary.json",
}
REQUIRES = {
    "ingest": (),
    "homes": ("ingest",),
    "evac": ("ingest", "homes"),
    "mobility": ("ingest",),
    "enrich": ("homes",),
    "report": ("evac", "enrich"),
    "fit": ("evac", "enrich", "mobility"),
}

HOMES_COLUMNS = ["device_id", "home_lat", "home_lon", "night_sightings", "clusters", "winning_cluster_size",
                 "confidence"]
EVAC_COLUMNS = ["device_id", "active", "evacuated", "departure_date", "reentry_date", "duration_days",
                "shelter_distance_mi", "observed_days"]
MOBILITY_COLUMNS = ["device_id", "avg_daily_trips", "avg_daily_hull_area_km2", "avg_daily_hull_perimeter_km",
                    "observed_days", "hull_days"]


# --------------------------------------------------------------------------
# file helpers


def digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path: Path, write: Callable[[Path], None]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        write(Path(tmp))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_csv(df: pd.DataFrame, path: Path) -> None:
    atomic_write(path, lambda p: df.to_csv(p, index=False, lineterminator="\n"))


def write_json(obj, path: Path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    atomic_write(path, lambda p: p.write_text(text))


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return o.name
    raise TypeError(type(o))


def _concat(frames: list[pd.DataFrame], columns: list[str]) -> pd.DataFrame:
    full = [f for f in frames if len(f)]
    return pd.concat(full, ignore_index=True) if full else pd.DataFrame(columns=columns)


def _read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"device_id": str, "tract_id": str, "order_date": str,
                                    "departure_date": str, "reentry_date": str})


# --------------------------------------------------------------------------
# stage context


class Pipeline:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)

    def path(self, stage: str) -> Path:
        return self.out / ARTIFACTS[stage]

    def need(self, stage: str) -> None:
        for up in REQUIRES[stage]:
            if not self.path(up).exists():
                raise MissingArtifact(up, str(self.path(up)))

    def shards(self) -> list[Path]:
        return ingest.store_shards(self.out / "store")

    def run(self, stage: str) -> dict:
        if stage == "all":
            return {s: self.run(s) for s in STAGES}
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        self.need(stage)
        log.info("stage %s", stage)
        stats, inputs, outputs = getattr(self, f"_{stage}")()
        write_json(stats, self.out / "stats" / f"{stage}.json")
        self._record(stage, inputs, outputs + [self.out / "stats" / f"{stage}.json"])
        return stats

    def _record(self, stage: str, inputs: list[Path], outputs: list[Path]) -> None:
        mpath = self.out / "manifest.json"
        manifest = json.loads(mpath.read_text()) if mpath.exists() else {"stages": {}}
        rel = lambda p: str(Path(p).relative_to(self.out)) if Path(p).is_relative_to(self.out) else Path(p).name
        manifest["stages"][stage] = {
            "inputs": {rel(p): digest(Path(p)) for p in inputs},
            "outputs": {rel(p): digest(Path(p)) for p in outputs},
            "parameters": self.cfg.parameters(),
        }
        write_json(manifest, mpath)

    # ----------------------------------------------------------------- stages

    def _ingest(self):
        cfg = self.cfg
        cfg.require("sightings")
        stats = ingest.ingest_file(cfg.sightings, self.out / "store", cfg.ingest_filter(),
                                   n_shards=cfg.shards or None, block_bytes=cfg.block_mb << 20, jobs=cfg.jobs)
        d = stats.to_dict()
        d["conserved"] = stats.conserved
        return d, [cfg.sightings], self.shards() + [self.path("ingest")]

    def _homes(self):
        cfg = self.cfg
        params = homes.HomeParams(cfg.eps_m, cfg.min_pts, int(cfg.night_start_h * 3600), int(cfg.night_end_h * 3600))
        parts = map_ordered(_homes_task, [(p, cfg.baseline, params) for p in self.shards()], cfg.jobs)
        df = _concat([p for p, _ in parts], HOMES_COLUMNS).sort_values("device_id", kind="stable")
        stats = sum((c for _, c in parts), Counter())
        out = {"devices": int(stats["devices"]), "homes": len(df),
               "insufficient_night_sightings": int(stats["insufficient"]), "all_noise": int(stats["all_noise"])}
        write_csv(df, self.path("homes"))
        return out, [self.path("ingest")], [self.path("homes")]

    def _evac(self):
        cfg = self.cfg
        homes_df = _read_csv(self.path("homes"))
        parts = map_ordered(_evac_task, [(p, homes_df, cfg.study, cfg.window, cfg.threshold_mi)
                                         for p in self.shards()], cfg.jobs)
        df = _concat(parts, EVAC_COLUMNS).sort_values("device_id", kind="stable")
        act = df["active"].astype(bool)
        ev = df["evacuated"].astype(bool)
        stats = {"devices_with_home": len(df), "active": int(act.sum()), "inactive": int((~act).sum()),
                 "evacuated": int(ev.sum()), "not_evacuated": int((act & ~ev).sum()),
                 "departure_absent": int((ev & df["departure_date"].isna()).sum()),
                 "reentry_censored": int((ev & df["reentry_date"].isna()).sum())}
        write_csv(df, self.path("evac"))
        return stats, [self.path("ingest"), self.path("homes")], [self.path("evac")]

    def _mobility(self):
        cfg = self.cfg
        params = mobility.TripParams(cfg.roam_m, cfg.dwell_s, cfg.gap_s)
        parts = map_ordered(_mobility_task, [(p, cfg.baseline, params, cfg.trips_denominator)
                                             for p in self.shards()], cfg.jobs)
        df = _concat([p for p, _ in parts], MOBILITY_COLUMNS).sort_values("device_id", kind="stable")
        missing = sum(m for _, m in parts)
        stats = {"devices": len(df) + missing, "baselines": len(df), "no_baseline_data": missing}
        write_csv(df, self.path("mobility"))
        return stats, [self.path("ingest")], [self.path("mobility")]

    def _enrich(self):
        cfg = self.cfg
        cfg.require("zones", "elevation", "tracts")
        homes_df = _read_csv(self.path("homes"))
        zones = geo.load_zones(cfg.zones)
        grid = geo.load_elevation_grid(cfg.elevation)
        tracts = enrich.load_tracts(cfg.tracts)
        inputs = [self.path("homes"), cfg.zones, cfg.elevation, cfg.tracts]
        polygons = sidecar = None
        if cfg.tract_polygons is not None:
            polygons = enrich.tract_polygons(geo.load_polygons(cfg.tract_polygons, "tract_id"))
            inputs.append(cfg.tract_polygons)
        elif cfg.tract_sidecar is not None:
            sidecar = pd.read_csv(cfg.tract_sidecar, dtype=str)
            inputs.append(cfg.tract_sidecar)
        df, stats = enrich.build_contexts(homes_df, zones, grid, tracts, polygons, sidecar)
        write_csv(df, self.path("enrich"))
        return stats, inputs, [self.path("enrich")]

    def _report(self):
        cfg = self.cfg
        prof = _read_csv(self.path("evac"))
        ctx = _read_csv(self.path("enrich"))
        rdir = self.path("report")
        outputs, closure = [], {}
        for name, fn in analytics.REPORTS.items():
            if fn is analytics.shelter_distance_distribution:
                table = fn(prof, ctx, cfg.distance_edges_mi)
            else:
                table = fn(prof, ctx)
            write_csv(table, rdir / name)
            outputs.append(rdir / name)
            closure[name] = analytics.closure_check(name, table)
        joined = analytics.join(prof, ctx)
        stats = {"active_devices": len(joined), "evacuees": int(joined["evacuated"].sum()),
                 "closure": closure}
        return stats, [self.path("evac"), self.path("enrich")], outputs

    def _fit(self):
        cfg = self.cfg
        prof = _read_csv(self.path("evac"))
        ctx = _read_csv(self.path("enrich"))
        base = _read_csv(self.path("mobility"))
        table = choice_model.join_device_table(prof, ctx, base)
        small = choice_model.ModelSpec("model_1", choice_model.MODEL_1.predictors, order_encoding=cfg.order_encoding)
        big = choice_model.ModelSpec("model_2", choice_model.MODEL_2.predictors, order_encoding=cfg.order_encoding)
        result = choice_model.fit_models(table, small, big)
        summary = {
            "active_devices": len(table),
            "dropped_incomplete": result["dropped"],
            "models": {k: f.to_dict() for k, f in result["fits"].items()},
            "lr_test": result["lr_test"],
        }
        write_json(summary, self.out / "model_summary.json")
        text = choice_model.summary_table(result)
        atomic_write(self.out / "model_summary.txt", lambda p: p.write_text(text))
        stats = {"active_devices": len(table), "used": len(table) - result["dropped"],
                 "dropped_incomplete": result["dropped"]}
        return stats, [self.path("evac"), self.path("enrich"), self.path("mobility")], \
            [self.out / "model_summary.json", self.out / "model_summary.txt"]


# --------------------------------------------------------------------------
# per-shard workers (module level so they pickle)


def _homes_task(args):
    path, month, params = args
    shard = ingest.load_shard(path)
    recs, counts = [], Counter()
    for traj in shard.trajectories():
        counts["devices"] += 1
        try:
            h = homes.infer_home(traj, month, params)
        except InsufficientData as e:
            counts["all_noise" if "noise" in str(e) else "insufficient"] += 1
            continue
        recs.append({"device_id": h.device_id, "home_lat": h.lat, "home_lon": h.lon,
                     "night_sightings": h.night_sighting_count, "clusters": h.cluster_count,
                     "winning_cluster_size": h.winning_cluster_size, "confidence": h.confidence})
    return pd.DataFrame.from_records(recs, columns=HOMES_COLUMNS), counts


def _evac_task(args):
    path, homes_df, month, window, threshold_mi = args
    shard = ingest.load_shard(path)
    lookup = homes_df.set_index("device_id")
    ids = [str(d) for d in shard.device_ids]
    known = np.array([d in lookup.index for d in ids], dtype=bool)
    hlat = np.full(len(ids), np.nan)
    hlon = np.full(len(ids), np.nan)
    if known.any():
        sel = [d for d, k in zip(ids, known) if k]
        hlat[known] = lookup.loc[sel, "home_lat"].to_numpy(dtype=np.float64)
        hlon[known] = lookup.loc[sel, "home_lon"].to_numpy(dtype=np.float64)
    mins = evacuation.shard_daily_min(shard, hlat, hlon, month)
    recs = []
    for k in np.flatnonzero(known):
        series = evacuation.DailyDistanceSeries(ids[k], month[0], mins[k])
        p = evacuation.detect_evacuation(series, window, threshold_mi)
        recs.append({"device_id": p.device_id, "active": p.active, "evacuated": p.evacuated,
                     "departure_date": p.departure_date.isoformat() if p.departure_date else None,
                     "reentry_date": p.reentry_date.isoformat() if p.reentry_date else None,
                     "duration_days": p.duration_days, "shelter_distance_mi": p.shelter_distance_mi,
                     "observed_days": int((~np.isnan(mins[k])).sum())})
    df = pd.DataFrame.from_records(recs, columns=EVAC_COLUMNS)
    df["duration_days"] = df["duration_days"].astype("Int64")
    return df


def _mobility_task(args):
    path, month, params, denominator = args
    shard = ingest.load_shard(path)
    recs, missing = [], 0
    for traj in shard.trajectories():
        try:
            b = mobility.baseline_summary(traj, month, params, denominator)
        except NoBaselineData:
            missing += 1
            continue
        recs.append(vars(b))
    return pd.DataFrame.from_records(recs, columns=MOBILITY_COLUMNS), missing
