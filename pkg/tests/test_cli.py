import json
import shutil

import pytest

from evacuscope.cli import main
from evacuscope.pipeline import ARTIFACTS, STAGES

REPORTS = ("table2_crosstab.csv", "fig4_departure.csv", "fig4_reentry.csv", "fig5_matrix.csv", "fig6_distance.csv",
           "fig8_duration.csv", "fig7_fig9_county.csv", "fig10_elevation.csv")


def _config(world, tmp_path, **extra):
    cfg = (world / "pipeline.toml").read_text()
    for k, v in extra.items():
        cfg += f"{k} = {json.dumps(v)}\n"
    p = tmp_path / "pipeline.toml"
    p.write_text(cfg.replace('"sightings.csv"', json.dumps(str(world / "sightings.csv")))
                 .replace('"zones.geojson"', json.dumps(str(world / "zones.geojson")))
                 .replace('"elevation.asc"', json.dumps(str(world / "elevation.asc")))
                 .replace('"tracts.csv"', json.dumps(str(world / "tracts.csv")))
                 .replace('"tracts.geojson"', json.dumps(str(world / "tracts.geojson"))))
    return p


@pytest.fixture(scope="module")
def full_run(small_world, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = _config(small_world, tmp)
    out = tmp / "run"
    assert main(["all", "--config", str(cfg), "--out", str(out)]) == 0
    return cfg, out


def _snapshot(out):
    return {str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def test_run_all_writes_every_artifact(full_run):
    _, out = full_run
    for name in REPORTS:
        assert (out / "reports" / name).exists(), name
    for f in ("homes.csv", "evacuation_profiles.csv", "mobility_baseline.csv", "device_context.csv",
              "model_summary.json", "model_summary.txt", "manifest.json"):
        assert (out / f).exists(), f
    summary = json.loads((out / "model_summary.json").read_text())
    assert set(summary["models"]) == {"model_1", "model_2"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["stages"]) == set(STAGES)
    report_stats = json.loads((out / "stats" / "report.json").read_text())
    assert all(v["closes"] for v in report_stats["closure"].values() if v)


def test_rerun_is_byte_identical(full_run, tmp_path):
    cfg, out = full_run
    before = _snapshot(out)
    assert main(["all", "--config", str(cfg), "--out", str(out)]) == 0
    assert _snapshot(out) == before
    other = tmp_path / "again"
    assert main(["all", "--config", str(cfg), "--out", str(other), "--jobs", "2"]) == 0
    a = json.loads((out / "manifest.json").read_text())
    b = json.loads((other / "manifest.json").read_text())
    for stage in STAGES:
        assert a["stages"][stage]["outputs"] == b["stages"][stage]["outputs"], stage


@pytest.mark.parametrize("stage", ["homes", "evac", "enrich", "report"])
def test_stage_isolation(full_run, tmp_path, stage):
    cfg, out = full_run
    work = tmp_path / "copy"
    shutil.copytree(out, work)
    before = _snapshot(work)
    target = work / ARTIFACTS[stage]
    if target.is_dir():
        shutil.rmtree(target)
    else:
        target.unlink()
    assert main([stage, "--config", str(cfg), "--out", str(work)]) == 0
    assert _snapshot(work) == before


def test_fit_without_enrich_names_enrich(small_world, tmp_path, capsys):
    cfg = _config(small_world, tmp_path)
    out = tmp_path / "partial"
    for stage in ("ingest", "homes", "evac", "mobility"):
        assert main([stage, "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["fit", "--config", str(cfg), "--out", str(out)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "MissingArtifact" and err["required_stage"] == "enrich" and err["stage"] == "fit"


def test_invalid_config_reports_json(small_world, tmp_path, capsys):
    cfg = _config(small_world, tmp_path, window_start="2017-10-01")
    assert main(["homes", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "InvalidConfig"


def test_synth_subcommand(tmp_path, capsys):
    scen = tmp_path / "scenario.toml"
    scen.write_text("devices = 5\nbaseline_days = 2\n")
    assert main(["synth", "--config", str(scen), "--out", str(tmp_path / "w")]) == 0
    assert json.loads(capsys.readouterr().out)["sightings.csv"].endswith("sightings.csv")
    assert (tmp_path / "w" / "pipeline.toml").exists()


def test_unknown_stage_exits_with_usage():
    with pytest.raises(SystemExit) as exc:
        main(["bogus", "--config", "x.toml"])
    assert exc.value.code == 2
