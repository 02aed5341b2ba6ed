"""Command-line entry point for the experiment harness.

Each subcommand maps onto one benchmark scenario; a JSON config file can
override any ExperimentSpec field, and --seeds / --out override the config.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .bench import ExperimentSpec, default_spec, run_scenario

_SUBCOMMANDS = {
    "retrieval": "retrieval",
    "generate": "generation",
    "grid": "grid",
    "efficiency": "efficiency",
    "rate-sim": "rating-sim",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stimloop",
        description="Closed-loop stimulus optimization benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, scenario in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {scenario} scenario")
        p.add_argument("--config", metavar="JSON",
                       help="experiment spec JSON file; fields override defaults")
        p.add_argument("--seeds", metavar="N[,N...]",
                       help="comma-separated seed list, or a count for range(N)")
        p.add_argument("--out", metavar="DIR",
                       help="output directory for report.csv, trace.jsonl, spec.json")
    return parser


def _parse_seeds(text: str) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty seed list")
    if len(parts) == 1 and "," not in text:
        return tuple(range(int(parts[0])))
    return tuple(int(p) for p in parts)


def load_spec(scenario: str, config_path: str | None, seeds: str | None,
              out: str | None) -> ExperimentSpec:
    if config_path is not None:
        with open(config_path) as fh:
            raw = json.load(fh)
        raw.setdefault("scenario", scenario)
        if raw["scenario"] != scenario:
            raise ValueError(
                f"config names scenario {raw['scenario']!r}, "
                f"subcommand wants {scenario!r}")
        spec = ExperimentSpec.from_json(raw)
    else:
        spec = default_spec(scenario)
    if seeds is not None:
        spec = replace(spec, seeds=_parse_seeds(seeds))
    if out is not None:
        spec = replace(spec, out_dir=out)
    spec.validate()
    return spec


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    scenario = _SUBCOMMANDS[args.command]
    try:
        spec = load_spec(scenario, args.config, args.seeds, args.out)
        report = run_scenario(spec)
        if spec.out_dir is not None:
            paths = report.write()
            for label, path in paths.items():
                print(f"{label}: {path}")
        for key in sorted(report.summary):
            print(f"{key} = {report.summary[key]}")
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
