"""Throughput and peak memory of ingest + homes + evac on a bulk synthetic file.

    python3 benchmarks/bench_pipeline.py --rows 10000000 --devices 20000 --workdir /tmp/bulk

Generation happens in this process; the measured stages run in a fresh child
process so its peak RSS covers only the pipeline. Prints one JSON object.
"""
from __future__ import annotations

import argparse
import json
import subprocess
import sys
import time
from pathlib import Path

CHILD = r"""
import json, resource, sys, time
from pathlib import Path
from evacuscope.config import PipelineConfig
from evacuscope.pipeline import Pipeline
src, out, jobs = sys.argv[1], sys.argv[2], int(sys.argv[3])
cfg = PipelineConfig(sightings=Path(src), out=Path(out), jobs=jobs)
pipe = Pipeline(cfg)
timing = {}
for stage in ("ingest", "homes", "evac"):
    t = time.perf_counter()
    pipe.run(stage)
    timing[stage] = time.perf_counter() - t
stats = json.loads((Path(out) / "stats" / "ingest.json").read_text())
# ru_maxrss survives exec and would report the parent's high-water mark
try:
    hwm = next(int(l.split()[1]) for l in open("/proc/self/status") if l.startswith("VmHWM"))
except (OSError, StopIteration):
    hwm = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
print(json.dumps({"seconds": timing, "peak_rss_mb": hwm / 1024,
                  "records": stats["records_read"]}))
"""


def measure(sightings: Path, out: Path, jobs: int = 1) -> dict:
    res = subprocess.run([sys.executable, "-c", CHILD, str(sightings), str(out), str(jobs)],
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    from evacuscope.synth import bulk_sightings

    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--rows", type=int, default=10_000_000)
    ap.add_argument("--devices", type=int, default=20_000)
    ap.add_argument("--workdir", type=Path, default=Path("bench_run"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)
    args.workdir.mkdir(parents=True, exist_ok=True)
    src = args.workdir / "sightings.csv"
    t = time.perf_counter()
    bulk_sightings(src, args.rows, args.devices)
    gen = time.perf_counter() - t
    result = measure(src, args.workdir / "run", args.jobs)
    result.update(generate_seconds=gen, file_mb=src.stat().st_size / 2**20,
                  total_seconds=sum(result["seconds"].values()))
    print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
