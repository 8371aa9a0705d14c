"""Command line entry point.

    evacuscope <stage> --config pipeline.toml [--jobs N] [--out DIR]
    evacuscope synth --config scenario.toml --out DIR

Stages: ingest, homes, evac, mobility, enrich, report, fit, all. Failures
exit nonzero and print a JSON error report on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig
from .errors import EvacuscopeError, MissingArtifact
from .pipeline import STAGES, Pipeline

EXIT_ERROR = 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evacuscope", description=__doc__.split("\n\n")[0])
    ap.add_argument("stage", choices=STAGES + ("all", "synth"))
    ap.add_argument("--config", required=True, type=Path, help="TOML config file")
    ap.add_argument("--out", type=Path, help="output directory (overrides the config)")
    ap.add_argument("--jobs", type=int, help="worker processes (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _error_report(err: BaseException, stage: str) -> dict:
    rep = {"error": type(err).__name__, "message": str(err), "stage": stage}
    if isinstance(err, MissingArtifact):
        rep["required_stage"] = err.stage
        rep["missing"] = err.path
    return rep


def run_synth(config: Path, out: Path | None, jobs: int | None) -> dict:
    from .synth import ScenarioConfig, generate

    cfg = ScenarioConfig.from_toml(config)
    if jobs:
        cfg.jobs = jobs
    if out is None:
        raise EvacuscopeError("synth needs --out")
    paths = generate(cfg, out)
    return {k: str(v) for k, v in paths.items()}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.stage == "synth":
            result = run_synth(args.config, args.out, args.jobs)
        else:
            cfg = PipelineConfig.from_toml(args.config)
            changes = {}
            if args.out is not None:
                changes["out"] = args.out
            if args.jobs is not None:
                changes["jobs"] = args.jobs
            if changes:
                cfg = cfg.replace(**changes)
            result = Pipeline(cfg).run(args.stage)
    except (EvacuscopeError, OSError) as err:
        print(json.dumps(_error_report(err, args.stage), sort_keys=True), file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
