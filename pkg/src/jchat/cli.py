"""
Command-line entry point.

Exit codes: 0 success (including per-document failures that were
isolated), 1 runtime error with the ledger left intact for resume,
2 configuration error before any work started.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .manifest import CorpusManifest, ManifestError, validate_manifest
from .pipeline import (
    RUNNABLE_STAGES,
    ConfigError,
    Pipeline,
    PipelineConfig,
    format_report_table,
)

log = logging.getLogger("jchat")

STAGE_COMMANDS = [s for s in RUNNABLE_STAGES]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jchat", description="dialogue-corpus construction pipeline")
    parser.add_argument("--config", help="TOML pipeline configuration file")
    parser.add_argument("--workdir", help="override paths.workdir from the config")
    parser.add_argument("--jobs", type=int, help="shard-level parallelism")
    parser.add_argument("--seed-override", type=int,
                        help="replace every configured seed with this value")
    parser.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGE_COMMANDS:
        sub.add_parser(stage, help=f"run the {stage} stage")
    run_p = sub.add_parser("run", help="run all pipeline stages in order")
    run_p.add_argument("--stages", help="comma-separated subset of stages to run")
    sub.add_parser("report", help="print the per-stage retention funnel")
    validate_p = sub.add_parser("validate", help="validate a manifest directory")
    validate_p.add_argument("manifest_dir", help="directory of shard-*.jsonl files")
    return parser


def load_config(args) -> PipelineConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    config = PipelineConfig.from_toml(args.config)
    if args.workdir:
        from pathlib import Path
        config.workdir = Path(args.workdir).resolve()
    if args.jobs:
        config.jobs = args.jobs
    if args.seed_override is not None:
        config.split.seed = args.seed_override
        config.features.seed = args.seed_override
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "validate":
        try:
            manifest = CorpusManifest.from_dir(args.manifest_dir)
            violations = validate_manifest(manifest)
        except ManifestError as e:
            print(f"error: {e}", file=sys.stderr)
            return 1
        for v in violations:
            print(v)
        print(f"{len(violations)} violation(s)")
        return 0 if not violations else 1

    try:
        config = load_config(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2

    try:
        with Pipeline(config) as pipeline:
            if args.command == "report":
                if not pipeline.ledger.path.exists():
                    print("error: no ledger in workdir; nothing to report", file=sys.stderr)
                    return 1
                report = pipeline.report()
                print(json.dumps(report, sort_keys=True, indent=2))
                print(format_report_table(report))
                return 0
            if args.command == "run":
                stages = None
                if getattr(args, "stages", None):
                    stages = [s.strip() for s in args.stages.split(",") if s.strip()]
                report = pipeline.run(stages)
            else:
                report = pipeline.run([args.command])
            print(format_report_table(report))
            return 0
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        log.exception("pipeline failed")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
