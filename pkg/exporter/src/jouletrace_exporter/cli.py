"""trace-export: convert profiler output to canonical trace files.

Subcommands:
  timeline  profiler trace-event JSON -> events.jsonl
  powerlog  sampler CSV log          -> power.csv

Summaries print to standard error. Exit codes: 0 success (possibly with
skipped records; see the summary), 1 on conversion failure or bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .powerlog import convert_power_log
from .timeline import ConversionError, convert_timeline


def _load_device_map(path: Path | None) -> dict[str, str]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConversionError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(payload, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in payload.items()
    ):
        raise ConversionError(f"{path}: device map must be an object of strings")
    return payload


def cmd_timeline(args: argparse.Namespace) -> int:
    device_map = _load_device_map(args.device_map)
    summary = convert_timeline(args.input, device_map, args.output, strict=args.strict)
    for line in summary.lines():
        print(line, file=sys.stderr)
    return 0


def cmd_powerlog(args: argparse.Namespace) -> int:
    device_map = _load_device_map(args.device_map)
    summary = convert_power_log(
        args.input,
        args.output,
        device_column=args.device_column,
        ts_column=args.ts_column,
        watts_column=args.watts_column,
        fraction_column=args.fraction_column,
        device_map=device_map,
        strict=args.strict,
    )
    for line in summary.lines():
        print(line, file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trace-export",
        description="Convert profiler timelines and power logs to canonical trace files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_timeline = sub.add_parser("timeline", help="trace-event JSON -> events.jsonl")
    p_timeline.add_argument("input", type=Path)
    p_timeline.add_argument("output", type=Path)
    p_timeline.add_argument("--device-map", type=Path, default=None,
                            help="JSON object: lane label -> canonical device label")
    p_timeline.add_argument("--strict", action="store_true",
                            help="fail instead of skipping unmapped lanes")
    p_timeline.set_defaults(func=cmd_timeline)

    p_powerlog = sub.add_parser("powerlog", help="sampler CSV -> power.csv")
    p_powerlog.add_argument("input", type=Path)
    p_powerlog.add_argument("output", type=Path)
    p_powerlog.add_argument("--device-column", default="device")
    p_powerlog.add_argument("--ts-column", default="ts")
    p_powerlog.add_argument("--watts-column", default="watts")
    p_powerlog.add_argument("--fraction-column", default=None,
                            help="input column holding the attribution fraction")
    p_powerlog.add_argument("--device-map", type=Path, default=None,
                            help="JSON object: raw device name -> canonical device label")
    p_powerlog.add_argument("--strict", action="store_true",
                            help="fail on unmapped devices or duplicate timestamps")
    p_powerlog.set_defaults(func=cmd_powerlog)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
