import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evacuscope.errors import MalformedRecord, OutOfRange
from evacuscope.ingest import (DROP_REASONS, IngestFilter, IngestStats, build_trajectories, ingest_file,
                               load_shard, local_day, month_range, parse_sighting, store_shards)

TABLE1 = [
    "1504068337\te07941996a2ffd303021914e0c12gcf\t1\t28.43023\t-81.60654\t5\t-14400",
    "1504068342\te07941996a2ffd303021914e0c12gcf\t1\t28.43038\t-81.60531\t25\t-14400",
    "1504068351\te07941996a2ffd303021914e0c12gcf\t1\t28.43029\t-81.60427\t5\t-14400",
    "1504068360\te07941996a2ffd303021914e0c12gcf\t1\t28.43058\t-81.60463\t100\t-14400",
    "1504068369\te07941996a2ffd303021914e0c12gcf\t1\t28.43139\t-81.60374\t5\t-14400",
]
HEADER = "timestamp,device_id,device_type,lat,lon,accuracy_m,tz_offset_s"


# --------------------------------------------------------------------------- parsing


def test_parse_table1_row():
    r = parse_sighting("1504068337,e07941996a2ffd303021914e0c12gcf,1,28.43023,-81.60654,5,-14400")
    assert (r.timestamp, r.lat, r.lon, r.accuracy_m, r.tz_offset_s) == (1504068337, 28.43023, -81.60654, 5, -14400)
    assert r.device_id == "e07941996a2ffd303021914e0c12gcf" and r.device_type == 1


def test_parse_tab_separated():
    assert parse_sighting(TABLE1[1]).lon == -81.60531


def test_parse_out_of_range_latitude():
    with pytest.raises(OutOfRange):
        parse_sighting("1504068337,e0,1,91.0,-81.6,5,-14400")
    with pytest.raises(OutOfRange):
        parse_sighting("1504068337,e0,1,28.0,-181.0,5,-14400")
    with pytest.raises(OutOfRange):
        parse_sighting("1504068337,e0,1,28.0,-81.0,-1,-14400")


@pytest.mark.parametrize("line", ["a,b,c", "x,e0,1,28.0,-81.0,5,-14400", "1,,1,28,-81,5,0", ""])
def test_parse_malformed(line):
    with pytest.raises(MalformedRecord):
        parse_sighting(line)


def test_record_errors_carry_reason():
    assert MalformedRecord("x").reason == "malformed"
    assert OutOfRange("x").reason == "out_of_range"


# --------------------------------------------------------------------------- local day


def test_local_day_examples():
    # 1504068337 - 14400 = 1504053937 -> 2017-08-30 00:45:37 by the datetime oracle
    assert dt.datetime.fromtimestamp(1504053937, dt.timezone.utc) == dt.datetime(2017, 8, 30, 0, 45, 37,
                                                                                    tzinfo=dt.timezone.utc)
    assert local_day(1504068337, -14400) == dt.date(2017, 8, 30)
    assert local_day(0, 0) == dt.date(1970, 1, 1)
    assert local_day(86399, 0) == dt.date(1970, 1, 1)
    assert local_day(86400, 0) == dt.date(1970, 1, 2)


@given(st.integers(-10**9, 4 * 10**9), st.integers(-14 * 3600, 14 * 3600))
def test_local_day_matches_datetime_oracle(ts, tz):
    expected = (dt.datetime(1970, 1, 1) + dt.timedelta(seconds=ts + tz)).date()
    assert local_day(ts, tz) == expected


def test_month_range():
    assert month_range("2017-09") == (dt.date(2017, 9, 1), dt.date(2017, 9, 30))
    assert month_range("2016-02") == (dt.date(2016, 2, 1), dt.date(2016, 2, 29))
    assert month_range("2017-12") == (dt.date(2017, 12, 1), dt.date(2017, 12, 31))


# --------------------------------------------------------------------------- trajectories


def test_out_of_order_records_sorted():
    lines = [TABLE1[2], TABLE1[0], TABLE1[1]]
    trajs, stats = build_trajectories(lines)
    t = trajs["e07941996a2ffd303021914e0c12gcf"]
    assert list(t.timestamp) == [1504068337, 1504068342, 1504068351]
    assert stats.conserved and stats.records_kept == 3


def test_accuracy_ceiling_drops_record():
    line = "1504068337,d1,1,28.43023,-81.60654,500,-14400"
    trajs, stats = build_trajectories([line, TABLE1[0]], IngestFilter(accuracy_max_m=250))
    assert stats.dropped["accuracy"] == 1
    assert "d1" not in trajs
    _, stats = build_trajectories(["1504068337,d1,1,28.4,-81.6,250,-14400"], IngestFilter(accuracy_max_m=250))
    assert stats.records_kept == 1


def test_bbox_and_date_range_filters():
    f = IngestFilter(bbox=(28.0, -82.0, 29.0, -81.0), date_ranges=[(dt.date(2017, 9, 1), dt.date(2017, 9, 30))])
    lines = [TABLE1[0],                                   # Aug 30 -> date_range
             "1504850000,d,1,30.0,-81.5,5,-14400",        # outside bbox
             "1504850000,d,1,28.5,-81.5,5,-14400"]        # kept
    trajs, stats = build_trajectories(lines, f)
    assert stats.dropped["date_range"] == 1 and stats.dropped["bbox"] == 1 and stats.records_kept == 1


def test_interleaved_devices_conserve_counts():
    rng = np.random.default_rng(0)
    lines, expected_bad = [], 0
    for i in range(20_000):
        dev = "A" if i % 2 == 0 else "B"
        ts = 1504000000 + int(rng.integers(0, 10**6))
        acc = 5 if rng.random() > 0.05 else 400
        lines.append(f"{ts},{dev},1,{rng.uniform(27, 28):.6f},{rng.uniform(-82, -81):.6f},{acc},-14400")
        if i % 997 == 0:
            lines.append("garbage line")
            expected_bad += 1
    trajs, stats = build_trajectories(lines)
    assert set(trajs) == {"A", "B"}
    assert stats.records_read == len(lines)
    assert stats.conserved
    assert stats.dropped["malformed"] == expected_bad
    assert sum(len(t) for t in trajs.values()) == stats.records_kept
    for t in trajs.values():
        assert np.all(np.diff(t.timestamp) >= 0)


def test_exact_duplicates_collapse_near_duplicates_kept():
    lines = [TABLE1[0], TABLE1[0], TABLE1[0].replace("28.43023", "28.43024")]
    trajs, stats = build_trajectories(lines)
    assert len(next(iter(trajs.values()))) == 2
    assert stats.dropped["duplicate"] == 1 and stats.conserved


@settings(max_examples=25, deadline=None)
@given(st.randoms(use_true_random=False))
def test_arrival_order_does_not_matter(rnd):
    rng = np.random.default_rng(1)
    lines = [f"{1504000000 + int(t)},{'d' + str(int(d))},1,27.5,-81.5,5,-14400"
             for t, d in zip(rng.integers(0, 5000, 300), rng.integers(0, 5, 300))]
    a, _ = build_trajectories(lines)
    shuffled = lines[:]
    rnd.shuffle(shuffled)
    b, _ = build_trajectories(shuffled)
    assert a.keys() == b.keys()
    for k in a:
        assert np.array_equal(a[k].timestamp, b[k].timestamp)
        assert np.array_equal(a[k].lat, b[k].lat)


def test_day_index_partitions_sightings():
    rng = np.random.default_rng(3)
    ts = np.sort(rng.integers(1504000000, 1504000000 + 10 * 86400, 500))
    tz = np.where(np.arange(500) < 250, -14400, -18000)   # device crosses a time-zone line
    lines = [f"{t},d,1,27.5,-81.5,5,{z}" for t, z in zip(ts, tz)]
    traj = build_trajectories(lines)[0]["d"]
    idx = traj.day_index()
    allidx = np.concatenate(list(idx.values()))
    assert sorted(allidx) == list(range(len(traj)))
    for day, sel in idx.items():
        assert all(local_day(traj.timestamp[i], traj.tz_offset_s[i]) == day for i in sel)
        assert np.all(np.diff(traj.timestamp[sel]) >= 0)


def test_stats_merge_is_commutative():
    a = IngestStats(10, 7)
    a.dropped.update({"accuracy": 3})
    b = IngestStats(5, 4)
    b.dropped.update({"malformed": 1})
    assert (a + b).to_dict() == (b + a).to_dict()
    assert (a + b).conserved
    assert IngestStats.from_dict((a + b).to_dict()).to_dict() == (a + b).to_dict()


# --------------------------------------------------------------------------- file ingest


def _write_stream(path, lines, header=True, sep=","):
    body = [HEADER.replace(",", sep)] if header else []
    body += [ln.replace(",", sep) for ln in lines]
    path.write_text("\n".join(body) + "\n")


def _random_lines(rng, n, devices=40):
    out = []
    for _ in range(n):
        d = int(rng.integers(devices))
        ts = 1501560000 + int(rng.integers(0, 61 * 86400))
        out.append(f"{ts},dev{d:03d},{1 + d % 2},{rng.uniform(26, 29):.6f},{rng.uniform(-84, -80):.6f},"
                   f"{rng.choice([5, 10, 300])},-14400")
    return out


@pytest.mark.parametrize("sep,header", [(",", True), ("\t", True), (",", False)])
def test_ingest_file_matches_in_memory_build(tmp_path, sep, header):
    rng = np.random.default_rng(7)
    lines = _random_lines(rng, 5000)
    lines += lines[:50]                                      # duplicates
    lines.insert(100, "1,2,3")                               # wrong field count
    lines.insert(200, "1501600000,devX,1,95.0,-81.0,5,-14400")  # out of range
    src = tmp_path / "s.csv"
    _write_stream(src, lines, header, sep)
    stats = ingest_file(src, tmp_path / "store", n_shards=4, block_bytes=8192)
    ref, ref_stats = build_trajectories(lines)
    assert stats.conserved
    assert stats.to_dict() == ref_stats.to_dict()
    got = {}
    for p in store_shards(tmp_path / "store"):
        for t in load_shard(p).trajectories():
            got[t.device_id] = t
    assert got.keys() == ref.keys()
    for k in ref:
        for col in ("timestamp", "lat", "lon", "accuracy_m", "tz_offset_s", "device_type"):
            assert np.array_equal(getattr(got[k], col), getattr(ref[k], col)), col
    index = json.loads((tmp_path / "store" / "index.json").read_text())
    assert index["n_shards"] == 4 and sum(s["devices"] for s in index["shards"]) == len(ref)


def test_ingest_file_survives_unparseable_numbers(tmp_path):
    lines = _random_lines(np.random.default_rng(1), 300)
    lines.insert(10, "notanumber,dev1,1,27.0,-81.0,5,-14400")
    lines.insert(20, "1501600000,dev1,1,27.0,abc,5,-14400")
    src = tmp_path / "s.csv"
    _write_stream(src, lines)
    stats = ingest_file(src, tmp_path / "store", n_shards=2)
    assert stats.dropped["malformed"] == 2
    assert stats.conserved


def test_ingest_is_deterministic(tmp_path):
    lines = _random_lines(np.random.default_rng(2), 3000)
    src = tmp_path / "s.csv"
    _write_stream(src, lines)
    ingest_file(src, tmp_path / "a", n_shards=3, block_bytes=4096)
    ingest_file(src, tmp_path / "b", n_shards=3, block_bytes=1 << 20)
    for pa_, pb in zip(store_shards(tmp_path / "a"), store_shards(tmp_path / "b")):
        assert pa_.read_bytes() == pb.read_bytes()


def test_every_drop_reason_reported():
    _, stats = build_trajectories([])
    assert set(stats.to_dict()["dropped"]) == set(DROP_REASONS)
