import datetime as dt
import filecmp

import numpy as np
import pandas as pd
import pytest

from evacuscope.errors import InvalidConfig
from evacuscope.evacuation import daily_min_distance
from evacuscope.geo import METERS_PER_MILE
from evacuscope.ingest import IngestFilter, ingest_file, load_shard, month_range, store_shards
from evacuscope.synth import ScenarioConfig, generate, plan_population, quota

from conftest import SMALL_SCENARIO


def test_same_seed_gives_identical_files(tmp_path, small_world):
    again = tmp_path / "again"
    generate(ScenarioConfig.from_dict(dict(SMALL_SCENARIO)), again)
    names = sorted(p.name for p in small_world.iterdir())
    assert names == sorted(p.name for p in again.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(small_world, again, names, shallow=False)
    assert mismatch == [] and errors == []


def test_worker_count_does_not_change_output(tmp_path, small_world):
    cfg = ScenarioConfig.from_dict(dict(SMALL_SCENARIO, jobs=2))
    generate(cfg, tmp_path / "par", batch=7)
    assert filecmp.cmp(small_world / "sightings.csv", tmp_path / "par" / "sightings.csv", shallow=False)


def test_different_seed_differs(tmp_path, small_world):
    generate(ScenarioConfig.from_dict(dict(SMALL_SCENARIO, seed=18)), tmp_path / "s18")
    assert not filecmp.cmp(small_world / "sightings.csv", tmp_path / "s18" / "sightings.csv", shallow=False)


def test_zero_evacuation_share(tmp_path):
    cfg = ScenarioConfig.from_dict({"devices": 200, "evac_rate_none": [0] * 3, "evac_rate_voluntary": [0] * 3,
                                    "evac_rate_mandatory": [0] * 3})
    assert not any(p.evacuated for p in plan_population(cfg))


def test_departure_shares_match_target_at_ten_thousand():
    cfg = ScenarioConfig.from_dict({"devices": 10_000})
    plans = [p for p in plan_population(cfg) if p.evacuated]
    got = pd.Series([p.departure for p in plans]).value_counts(normalize=True)
    w = np.asarray(cfg.departure_weights) / np.sum(cfg.departure_weights)
    for d, share in zip(cfg.departure_dates, w):
        assert abs(got.get(dt.date.fromisoformat(d), 0.0) - share) <= 0.01
    assert abs(got[dt.date(2017, 9, 9)] - 0.2627) <= 0.01


def test_quota_is_exact_largest_remainder():
    assert quota(10, [0.5, 0.3, 0.2]).tolist() == [5, 3, 2]
    assert quota(7, [1, 1, 1]).sum() == 7
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(0, 500))
        w = rng.random(int(rng.integers(1, 8)))
        q = quota(n, w)
        assert q.sum() == n and np.all(np.abs(q - n * w / w.sum()) < 1)


@pytest.mark.parametrize("bad", [
    {"devices": 0}, {"dropout_prob": 1.5}, {"order_shares": [0.5, 0.5]}, {"trip_choices": [0, 1, 2, 3, 4]},
    {"duration_choices": [1, 2, 3]}, {"baseline_days": 40}, {"noise_m": -1}, {"colour": "blue"},
])
def test_invalid_configs_rejected(bad):
    with pytest.raises(InvalidConfig):
        ScenarioConfig.from_dict(bad)


def test_toml_roundtrip(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text('devices = 12\nseed = 3\nevac_rate_none = [0.1, 0.2, 0.3]\n')
    cfg = ScenarioConfig.from_toml(p)
    assert (cfg.devices, cfg.seed, cfg.evac_rate_none) == (12, 3, [0.1, 0.2, 0.3])


def test_sightings_conform_to_ingest_schema(tmp_path, small_world):
    stats = ingest_file(small_world / "sightings.csv", tmp_path / "store", IngestFilter(), n_shards=2)
    assert stats.records_read == stats.records_kept
    assert sum(stats.dropped.values()) == 0
    header = (small_world / "sightings.csv").open().readline().strip()
    assert header == "timestamp,device_id,device_type,lat,lon,accuracy_m,tz_offset_s"


def test_truth_replays_against_sightings(tmp_path, small_world):
    ingest_file(small_world / "sightings.csv", tmp_path / "store", n_shards=1)
    trajs = {t.device_id: t for p in store_shards(tmp_path / "store") for t in load_shard(p).trajectories()}
    truth = pd.read_csv(small_world / "truth.csv")
    sept = month_range("2017-09")
    assert set(truth.device_id) == set(trajs)
    for r in truth.itertuples(index=False):
        s = daily_min_distance(trajs[r.device_id], (r.home_lat, r.home_lon), sept)
        d = s.min_distance_m
        if not r.evacuated:
            assert np.nanmax(d) < 0.1 * METERS_PER_MILE
            continue
        dep = s.index_of(dt.date.fromisoformat(r.departure_date))
        end = len(s) if pd.isna(r.reentry_date) else s.index_of(dt.date.fromisoformat(r.reentry_date))
        assert d[dep] < 0.1 * METERS_PER_MILE
        away = d[dep + 1:end]
        assert np.all(np.isnan(away) | (away > METERS_PER_MILE))
        assert np.nanmax(away) / METERS_PER_MILE == pytest.approx(r.shelter_distance_mi, rel=0.05)
