"""Command-line entry points.

    scomo ingest|fit|synth|deviation|params|correlate|report  batch stages
    scomo report --demo                                       synthetic cohort end-to-end
    scomo serve                                               HTTP/JSON API

Batch options come from --config (a flat TOML file of key = value
pairs, format version 1) overridden by individual flags. Failures exit
with status 2 after writing a machine-readable error.json that names
the failing stage; the same JSON is printed to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ScomoError
from .pipeline import (
    PIPELINE_STAGES,
    PipelineConfig,
    run_demo,
    run_stages,
)

_BATCH_STAGES = tuple(s for s in PIPELINE_STAGES)

# (flag, config field, type, help)
_CONFIG_FLAGS = (
    ("--trajectory", "trajectory", str, "participant trajectory CSV"),
    ("--grf-robotic", "grf_robotic", str, "robotic-side vertical GRF CSV"),
    ("--grf-contralateral", "grf_contralateral", str, "contralateral vertical GRF CSV"),
    ("--normative-dir", "normative_dir", str, "directory of normative recordings"),
    ("--out", "output_dir", str, "output directory (default: out)"),
    ("--cutoff", "filter_cutoff_hz", float, "low-pass cutoff in Hz (default 6)"),
    ("--threshold", "event_threshold_n", float, "heel-strike force threshold in N (default 20)"),
    ("--cycles", "n_cycles", int, "gait cycles to segment (default 8)"),
    ("--deviation-mode", "deviation_mode", str, "sum_angles or sum_cosines"),
    ("--robotic-side", "robotic_side", str, "which leg is the robotic side: l or r"),
    ("--belt-speed", "belt_speed_mps", float, "treadmill belt speed for step length, m/s"),
    ("--seed", "seed", int, "seed for randomized steps"),
)


def _add_batch_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file (flat key = value)")
    for flag, dest, typ, help_text in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, type=typ, default=None, help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scomo",
        description="Gait body-image measurement toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for stage in _BATCH_STAGES:
        p = sub.add_parser(stage, help=f"run the pipeline through the {stage} stage")
        _add_batch_flags(p)
        if stage == "report":
            p.add_argument(
                "--demo",
                action="store_true",
                help="generate the synthetic demo cohort and run it end to end",
            )

    p = sub.add_parser("serve", help="run the HTTP/JSON session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--root", default=None, help="store directory for event logs")
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    base = {}
    if args.config:
        base = PipelineConfig.from_toml(args.config).as_dict()
    for _, dest, _, _ in _CONFIG_FLAGS:
        value = getattr(args, dest, None)
        if value is not None:
            base[dest] = value
    return PipelineConfig.from_mapping(base)


def _emit_error(stage: str, message: str) -> int:
    doc = {"status": "error", "stage": stage, "message": message}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import create_app
        from .session import SessionStore

        app = create_app(SessionStore(root=args.root))
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    if args.command == "report" and args.demo:
        out = Path(args.output_dir or "out")
        status = run_demo(out, seed=args.seed if args.seed is not None else 0)
        if status != 0:
            err = json.loads((out / "error.json").read_text())
            return _emit_error(err["stage"], err["message"])
        return 0

    try:
        config = _config_from_args(args)
    except (ScomoError, OSError, ValueError) as exc:
        # ValueError covers TOML parse failures
        return _emit_error("config", str(exc))

    status = run_stages(config, args.command)
    if status != 0:
        err = json.loads((Path(config.output_dir) / "error.json").read_text())
        return _emit_error(err["stage"], err["message"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
