"""Sighting parsing, validation and device-sharded trajectory storage.

Input rows carry seven fields in this order::

    timestamp, device_id, device_type, lat, lon, accuracy_m, tz_offset_s

comma- or tab-separated, with an optional header. ``local time = timestamp +
tz_offset_s`` is the only clock used for day and night-window binning.
"""
from __future__ import annotations

import datetime as dt
import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import pandas as pd
import pyarrow as pa
import pyarrow.compute as pc
import pyarrow.csv as pacsv
import pyarrow.parquet as pq

from .errors import MalformedRecord, OutOfRange

log = logging.getLogger(__name__)

COLUMNS = ("timestamp", "device_id", "device_type", "lat", "lon", "accuracy_m", "tz_offset_s")
DROP_REASONS = ("malformed", "out_of_range", "accuracy", "bbox", "date_range", "duplicate")
EPOCH = dt.date(1970, 1, 1)
SECONDS_PER_DAY = 86_400

_ARROW_TYPES = {
    "timestamp": pa.int64(), "device_id": pa.string(), "device_type": pa.int64(),
    "lat": pa.float64(), "lon": pa.float64(), "accuracy_m": pa.float64(), "tz_offset_s": pa.int64(),
}


@dataclass(frozen=True)
class SightingRecord:
    timestamp: int
    device_id: str
    device_type: int
    lat: float
    lon: float
    accuracy_m: float
    tz_offset_s: int

    @property
    def local_day(self) -> dt.date:
        return local_day(self.timestamp, self.tz_offset_s)


def _check_ranges(lat, lon, acc):
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0) or not acc >= 0.0:
        raise OutOfRange(f"lat={lat} lon={lon} accuracy={acc}")


def parse_sighting(line: str, sep: str | None = None) -> SightingRecord:
    """Parse one delimited record; raises MalformedRecord or OutOfRange."""
    line = line.rstrip("\r\n")
    if sep is None:
        sep = "\t" if "\t" in line else ","
    parts = line.split(sep)
    if len(parts) != len(COLUMNS):
        raise MalformedRecord(f"expected {len(COLUMNS)} fields, got {len(parts)}")
    ts, dev, dtype, lat, lon, acc, tz = (p.strip() for p in parts)
    if not dev:
        raise MalformedRecord("empty device_id")
    try:
        rec = SightingRecord(int(ts), dev, int(dtype), float(lat), float(lon), float(acc), int(tz))
    except ValueError as exc:
        raise MalformedRecord(str(exc)) from None
    _check_ranges(rec.lat, rec.lon, rec.accuracy_m)
    return rec


def local_day(ts: int, tz_offset_s: int) -> dt.date:
    """Calendar date of ``ts + tz_offset_s`` read as UTC seconds."""
    return EPOCH + dt.timedelta(days=(int(ts) + int(tz_offset_s)) // SECONDS_PER_DAY)


def day_number(d: dt.date) -> int:
    return (d - EPOCH).days


def day_from_number(n: int) -> dt.date:
    return EPOCH + dt.timedelta(days=int(n))


def local_day_index(ts, tz) -> np.ndarray:
    """Vectorised local day as days since 1970-01-01."""
    return (np.asarray(ts, dtype=np.int64) + np.asarray(tz, dtype=np.int64)) // SECONDS_PER_DAY


def month_range(month: str) -> tuple[dt.date, dt.date]:
    """'2017-08' -> (2017-08-01, 2017-08-31)."""
    first = dt.date.fromisoformat(month + "-01")
    nxt = dt.date(first.year + (first.month == 12), first.month % 12 + 1, 1)
    return first, nxt - dt.timedelta(days=1)


# --------------------------------------------------------------------------
# filtering and statistics


@dataclass
class IngestFilter:
    accuracy_max_m: float = 250.0
    bbox: tuple[float, float, float, float] | None = None  # min_lat, min_lon, max_lat, max_lon
    date_ranges: Sequence[tuple[dt.date, dt.date]] = ()    # inclusive local-day ranges


@dataclass
class IngestStats:
    records_read: int = 0
    records_kept: int = 0
    dropped: Counter = field(default_factory=Counter)

    def merge(self, other: "IngestStats") -> "IngestStats":
        out = IngestStats(self.records_read + other.records_read,
                          self.records_kept + other.records_kept,
                          self.dropped + other.dropped)
        return out

    __add__ = merge

    @property
    def conserved(self) -> bool:
        return self.records_read == self.records_kept + sum(self.dropped.values())

    def to_dict(self) -> dict:
        return {"records_read": self.records_read, "records_kept": self.records_kept,
                "dropped": {r: int(self.dropped.get(r, 0)) for r in DROP_REASONS}}

    @classmethod
    def from_dict(cls, d: dict) -> "IngestStats":
        return cls(d["records_read"], d["records_kept"], Counter({k: v for k, v in d["dropped"].items() if v}))


def _filter_mask(cols: dict, filt: IngestFilter, stats: IngestStats) -> np.ndarray:
    """Row mask of records passing range and policy filters; counts each
    failing record under the first reason it hits."""
    lat, lon, acc = cols["lat"], cols["lon"], cols["accuracy_m"]
    keep = np.ones(lat.shape[0], dtype=bool)

    def drop(bad, reason):
        bad = bad & keep
        n = int(bad.sum())
        if n:
            stats.dropped[reason] += n
            keep[bad] = False

    with np.errstate(invalid="ignore"):
        drop(~((lat >= -90) & (lat <= 90) & (lon >= -180) & (lon <= 180) & (acc >= 0)), "out_of_range")
        drop(acc > filt.accuracy_max_m, "accuracy")
        if filt.bbox is not None:
            a, b, c, d = filt.bbox
            drop(~((lat >= a) & (lat <= c) & (lon >= b) & (lon <= d)), "bbox")
    if filt.date_ranges:
        day = local_day_index(cols["timestamp"], cols["tz_offset_s"])
        ok = np.zeros(day.shape[0], dtype=bool)
        for lo, hi in filt.date_ranges:
            ok |= (day >= day_number(lo)) & (day <= day_number(hi))
        drop(~ok, "date_range")
    return keep


# --------------------------------------------------------------------------
# trajectories


@dataclass
class DeviceTrajectory:
    device_id: str
    timestamp: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    accuracy_m: np.ndarray
    tz_offset_s: np.ndarray
    device_type: np.ndarray

    def __len__(self) -> int:
        return self.timestamp.shape[0]

    @property
    def local_seconds(self) -> np.ndarray:
        return self.timestamp + self.tz_offset_s

    @property
    def day(self) -> np.ndarray:
        return self.local_seconds // SECONDS_PER_DAY

    def day_index(self) -> dict[dt.date, np.ndarray]:
        """Local calendar day -> indices of that day's sightings (time order)."""
        days, order, starts = self.day_groups()
        bounds = np.append(starts, order.shape[0])
        return {day_from_number(d): order[bounds[i]:bounds[i + 1]] for i, d in enumerate(days)}

    def day_groups(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(unique days, permutation grouping sightings by day, group starts).

        The permutation is the identity unless a time-zone change makes local
        days non-monotone in timestamp order.
        """
        day = self.day
        if day.shape[0] and np.any(np.diff(day) < 0):
            order = np.argsort(day, kind="stable")
        else:
            order = np.arange(day.shape[0])
        sday = day[order]
        days, starts = np.unique(sday, return_index=True)
        return days, order, starts

    def select(self, mask) -> "DeviceTrajectory":
        return DeviceTrajectory(self.device_id, self.timestamp[mask], self.lat[mask], self.lon[mask],
                                self.accuracy_m[mask], self.tz_offset_s[mask], self.device_type[mask])

    def between(self, first: dt.date, last: dt.date) -> "DeviceTrajectory":
        day = self.day
        return self.select((day >= day_number(first)) & (day <= day_number(last)))


@dataclass
class Shard:
    """Columns for many devices, sorted by (device, timestamp)."""

    device_ids: np.ndarray   # unique ids, sorted
    starts: np.ndarray       # first row of each device
    columns: dict

    def __len__(self) -> int:
        return self.columns["timestamp"].shape[0]

    @property
    def n_devices(self) -> int:
        return self.device_ids.shape[0]

    @property
    def device_codes(self) -> np.ndarray:
        counts = np.diff(np.append(self.starts, len(self)))
        return np.repeat(np.arange(self.n_devices), counts)

    def trajectory(self, k: int) -> DeviceTrajectory:
        a = self.starts[k]
        b = self.starts[k + 1] if k + 1 < self.n_devices else len(self)
        c = self.columns
        return DeviceTrajectory(str(self.device_ids[k]), c["timestamp"][a:b], c["lat"][a:b], c["lon"][a:b],
                                c["accuracy_m"][a:b], c["tz_offset_s"][a:b], c["device_type"][a:b])

    def trajectories(self) -> Iterator[DeviceTrajectory]:
        for k in range(self.n_devices):
            yield self.trajectory(k)


def _sort_dedupe(cols: dict, stats: IngestStats) -> Shard:
    ids = np.asarray(cols["device_id"], dtype=object)
    codes, uniques = pd.factorize(ids, sort=True)
    order = np.lexsort((cols["device_type"], cols["tz_offset_s"], cols["accuracy_m"],
                        cols["lon"], cols["lat"], cols["timestamp"], codes))
    codes = codes[order]
    sorted_cols = {k: np.asarray(cols[k])[order] for k in COLUMNS if k != "device_id"}
    n = codes.shape[0]
    dup = np.zeros(n, dtype=bool)
    if n > 1:
        dup[1:] = ((codes[1:] == codes[:-1])
                   & (sorted_cols["timestamp"][1:] == sorted_cols["timestamp"][:-1])
                   & (sorted_cols["lat"][1:] == sorted_cols["lat"][:-1])
                   & (sorted_cols["lon"][1:] == sorted_cols["lon"][:-1]))
    n_dup = int(dup.sum())
    if n_dup:
        stats.dropped["duplicate"] += n_dup
        stats.records_kept -= n_dup
        keep = ~dup
        codes = codes[keep]
        sorted_cols = {k: v[keep] for k, v in sorted_cols.items()}
    present, starts = np.unique(codes, return_index=True)
    return Shard(np.asarray(uniques, dtype=object)[present], starts.astype(np.int64), sorted_cols)


def build_trajectories(records: Iterable[SightingRecord | str],
                       filt: IngestFilter | None = None) -> tuple[dict[str, DeviceTrajectory], IngestStats]:
    """In-memory ingest of records (parsed or raw lines) into trajectories."""
    filt = filt or IngestFilter()
    stats = IngestStats()
    rows = []
    for rec in records:
        stats.records_read += 1
        if isinstance(rec, str):
            try:
                rec = parse_sighting(rec)
            except (MalformedRecord, OutOfRange) as exc:
                stats.dropped[exc.reason] += 1
                continue
        rows.append(rec)
    cols = {
        "timestamp": np.array([r.timestamp for r in rows], dtype=np.int64),
        "device_id": np.array([r.device_id for r in rows], dtype=object),
        "device_type": np.array([r.device_type for r in rows], dtype=np.int64),
        "lat": np.array([r.lat for r in rows], dtype=np.float64),
        "lon": np.array([r.lon for r in rows], dtype=np.float64),
        "accuracy_m": np.array([r.accuracy_m for r in rows], dtype=np.float64),
        "tz_offset_s": np.array([r.tz_offset_s for r in rows], dtype=np.int64),
    }
    keep = _filter_mask(cols, filt, stats)
    cols = {k: v[keep] for k, v in cols.items()}
    stats.records_kept += int(keep.sum())
    shard = _sort_dedupe(cols, stats)
    return {t.device_id: t for t in shard.trajectories()}, stats


# --------------------------------------------------------------------------
# streaming file ingest


def _sniff(path: Path) -> tuple[str, bool]:
    with open(path, "rb") as fh:
        first = fh.readline().decode("utf-8", errors="replace").strip("\r\n")
    sep = "\t" if "\t" in first else ","
    head = first.split(sep)[0].strip()
    try:
        int(head)
        has_header = False
    except ValueError:
        has_header = bool(first)
    return sep, has_header


def _iter_blocks(path: Path, block_bytes: int, skip_first_line: bool) -> Iterator[bytes]:
    with open(path, "rb") as fh:
        if skip_first_line:
            fh.readline()
        carry = b""
        while True:
            chunk = fh.read(block_bytes)
            if not chunk:
                break
            chunk = carry + chunk
            cut = chunk.rfind(b"\n")
            if cut < 0:
                carry = chunk
                continue
            carry = chunk[cut + 1:]
            yield chunk[:cut + 1]
        if carry.strip():
            yield carry + b"\n"


def _parse_block(block: bytes, sep: str, stats: IngestStats) -> dict:
    bad_rows = 0

    def on_invalid(row):
        nonlocal bad_rows
        bad_rows += 1
        return "skip"

    read_opts = pacsv.ReadOptions(column_names=list(COLUMNS), use_threads=True)
    parse_opts = pacsv.ParseOptions(delimiter=sep, invalid_row_handler=on_invalid)
    try:
        table = pacsv.read_csv(pa.BufferReader(block), read_options=read_opts, parse_options=parse_opts,
                               convert_options=pacsv.ConvertOptions(column_types=_ARROW_TYPES))
        cols = {name: table.column(name).combine_chunks() for name in COLUMNS}
        null_mask = np.zeros(table.num_rows, dtype=bool)
        for name in COLUMNS:
            if cols[name].null_count:
                null_mask |= cols[name].is_null().to_numpy(zero_copy_only=False)
                cols[name] = cols[name].fill_null("" if name == "device_id" else 0)
        ids = cols["device_id"]
        out = {name: cols[name].to_numpy(zero_copy_only=False) for name in COLUMNS if name != "device_id"}
        out["device_id"] = ids
        null_mask |= pc.utf8_length(ids).to_numpy(zero_copy_only=False) == 0
    except pa.ArrowInvalid:
        # some value failed numeric conversion: reparse as text and coerce
        bad_rows = 0
        table = pacsv.read_csv(pa.BufferReader(block), read_options=read_opts, parse_options=parse_opts,
                               convert_options=pacsv.ConvertOptions(
                                   column_types={c: pa.string() for c in COLUMNS}))
        frame = table.to_pandas()
        null_mask = np.zeros(len(frame), dtype=bool)
        out = {}
        for name in COLUMNS:
            if name == "device_id":
                continue
            vals = pd.to_numeric(frame[name].str.strip(), errors="coerce").to_numpy(dtype=np.float64)
            null_mask |= np.isnan(vals)
            if _ARROW_TYPES[name] == pa.int64():
                with np.errstate(invalid="ignore"):
                    null_mask |= vals != np.round(vals)
                vals = np.where(null_mask, 0, vals).astype(np.int64)
            out[name] = vals
        ids = frame["device_id"].fillna("").str.strip()
        null_mask |= (ids == "").to_numpy()
        out["device_id"] = pa.array(ids.to_numpy(dtype=object), type=pa.string())

    n_rows = null_mask.shape[0]
    stats.records_read += n_rows + bad_rows
    stats.dropped["malformed"] += bad_rows + int(null_mask.sum())
    if null_mask.any():
        keep = ~null_mask
        out = {k: (v.filter(pa.array(keep)) if k == "device_id" else v[keep]) for k, v in out.items()}
    return out


def _shard_of(ids: pa.Array, n_shards: int) -> np.ndarray:
    enc = ids.dictionary_encode()
    uniq = enc.dictionary.to_numpy(zero_copy_only=False).astype(object)
    h = pd.util.hash_array(uniq) % np.uint64(n_shards)
    return h.astype(np.int64)[enc.indices.to_numpy(zero_copy_only=False)]


def _to_table(cols: dict) -> pa.Table:
    return pa.table({name: cols[name] for name in COLUMNS})


def shard_path(store: Path, k: int) -> Path:
    return store / f"shard_{k:04d}.parquet"


def _finalize_shard(store: Path, k: int) -> dict:
    parts = sorted(store.glob(f"part_{k:04d}_*.parquet"))
    stats = IngestStats()
    if parts:
        table = pa.concat_tables([pq.read_table(p) for p in parts])
        cols = {name: table.column(name).to_numpy() for name in COLUMNS}
        cols["device_id"] = table.column("device_id").to_numpy(zero_copy_only=False).astype(object)
        stats.records_kept = len(cols["timestamp"])
        shard = _sort_dedupe(cols, stats)
    else:
        shard = _sort_dedupe({name: np.empty(0, dtype=np.int64 if name in ("timestamp", "device_type",
                                                                            "tz_offset_s") else np.float64)
                              for name in COLUMNS} | {"device_id": np.empty(0, dtype=object)}, stats)
    write_shard(shard, shard_path(store, k))
    for p in parts:
        p.unlink()
    return {"shard": k, "records": len(shard), "devices": shard.n_devices,
            "duplicates": int(stats.dropped.get("duplicate", 0))}


def write_shard(shard: Shard, path: Path) -> None:
    counts = np.diff(np.append(shard.starts, len(shard)))
    cols = dict(shard.columns)
    cols["device_id"] = np.repeat(shard.device_ids, counts).astype(object)
    table = pa.table({name: cols[name] for name in COLUMNS}, schema=pa.schema(
        [(name, _ARROW_TYPES[name]) for name in COLUMNS]))
    tmp = path.with_suffix(".tmp")
    pq.write_table(table, tmp, compression="snappy")
    os.replace(tmp, path)


def load_shard(path: str | Path) -> Shard:
    table = pq.read_table(path)
    cols = {name: table.column(name).to_numpy() for name in COLUMNS if name != "device_id"}
    ids = table.column("device_id")
    if table.num_rows == 0:
        return Shard(np.empty(0, dtype=object), np.empty(0, dtype=np.int64), cols)
    enc = ids.combine_chunks().dictionary_encode() if isinstance(ids, pa.ChunkedArray) else ids.dictionary_encode()
    codes = enc.indices.to_numpy(zero_copy_only=False)
    change = np.flatnonzero(np.diff(codes) != 0) + 1
    starts = np.concatenate([[0], change]).astype(np.int64)
    dev = enc.dictionary.to_numpy(zero_copy_only=False).astype(object)[codes[starts]]
    return Shard(dev, starts, cols)


def store_shards(store: str | Path) -> list[Path]:
    return sorted(Path(store).glob("shard_*.parquet"))


def auto_shard_count(path: str | Path, target_bytes: int = 8 << 20) -> int:
    size = Path(path).stat().st_size
    return int(min(1024, max(8, -(-size // target_bytes))))


def ingest_file(path: str | Path, store: str | Path, filt: IngestFilter | None = None,
                n_shards: int | None = None, block_bytes: int = 32 << 20, jobs: int = 1) -> IngestStats:
    """Stream a sighting file into ``n_shards`` device-hashed, sorted shards.

    Only one text block plus one shard is resident at a time, so memory is
    bounded by block size and shard size rather than by file size.
    """
    path, store = Path(path), Path(store)
    filt = filt or IngestFilter()
    n_shards = n_shards or auto_shard_count(path)
    store.mkdir(parents=True, exist_ok=True)
    for old in list(store.glob("part_*.parquet")) + store_shards(store):
        old.unlink()
    sep, has_header = _sniff(path)
    stats = IngestStats()
    for b, block in enumerate(_iter_blocks(path, block_bytes, has_header)):
        cols = _parse_block(block, sep, stats)
        keep = _filter_mask(cols, filt, stats)
        if not keep.all():
            cols = {k: (v.filter(pa.array(keep)) if k == "device_id" else v[keep]) for k, v in cols.items()}
        n = len(cols["timestamp"])
        stats.records_kept += n
        if n == 0:
            continue
        shard = _shard_of(cols["device_id"], n_shards)
        order = np.argsort(shard, kind="stable")
        bounds = np.searchsorted(shard[order], np.arange(n_shards + 1))
        table = _to_table(cols).take(pa.array(order))
        for k in range(n_shards):
            if bounds[k + 1] > bounds[k]:
                pq.write_table(table.slice(bounds[k], bounds[k + 1] - bounds[k]),
                               store / f"part_{k:04d}_{b:06d}.parquet", compression="snappy")
        log.debug("block %d: %d rows kept", b, n)

    from .parallel import map_ordered
    results = map_ordered(_finalize_shard_task, [(str(store), k) for k in range(n_shards)], jobs)
    dups = sum(r["duplicates"] for r in results)
    stats.dropped["duplicate"] += dups
    stats.records_kept -= dups
    index = {"n_shards": n_shards, "shards": results, "stats": stats.to_dict()}
    (store / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return stats


def _finalize_shard_task(args):
    store, k = args
    return _finalize_shard(Path(store), k)
