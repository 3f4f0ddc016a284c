"""Command-line surface: account, summarize, edd, compare, precision, synth.

Each stage reads and writes the canonical on-disk formats, so footprints are
reusable intermediate artifacts. Machine-readable output goes only to the
declared output path (or standard out under ``--stdout``); everything meant
for humans goes to standard error. Exit codes: 0 success, 1 input/parse
error, 2 structural error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import accounting, footprint, io, similarity, synth
from .model import ParseError, StructuralError

LOG_ENV_VAR = "JOULETRACE_LOG"

# Refuse naive accounting beyond this many flattened ticks unless raised.
DEFAULT_NAIVE_TICK_GUARD = 10_000_000


@dataclass
class RunConfig:
    """Validated file arguments for one command invocation."""

    inputs: tuple[Path, ...] = ()
    out: Path | None = None
    to_stdout: bool = False

    def validate(self) -> None:
        for path in self.inputs:
            if not path.exists():
                raise ParseError(f"input file not found: {path}")


def _emit(content: str, out: Path | None, to_stdout: bool) -> None:
    if to_stdout:
        sys.stdout.write(content)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(content)


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _add_output_args(parser: argparse.ArgumentParser, required: bool = True) -> None:
    group = parser.add_mutually_exclusive_group(required=required)
    group.add_argument("-o", "--out", type=Path, help="output file path")
    group.add_argument(
        "--stdout", action="store_true", help="write the artifact to standard out"
    )


def cmd_account(args: argparse.Namespace) -> int:
    config = RunConfig((args.events, args.power), args.out, args.stdout)
    config.validate()
    trace = io.read_events(args.events, lenient=args.lenient)
    power = io.read_power(args.power, lenient=args.lenient)

    if args.naive:
        ticks = accounting.flattened_tick_count(trace)
        if ticks > args.naive_tick_guard:
            raise StructuralError(
                f"naive accounting refused: {ticks} flattened ticks exceed "
                f"the guard of {args.naive_tick_guard}"
            )
        tick_footprint, diagnostics = accounting.gen_footprint_naive(
            trace, power, args.tick_seconds
        )
        tef = accounting.aggregate(tick_footprint)
    else:
        tef, diagnostics = accounting.gen_footprint_optimized(
            trace, power, args.tick_seconds
        )

    _emit(io.render_footprint_json(tef), args.out, args.stdout)

    for device, joules in sorted(
        accounting.device_energy_totals(trace, power, args.tick_seconds).items()
    ):
        _say(f"device {device}: {io.fmt_real(joules)} J")
    _say(
        f"pre_sample_ticks={diagnostics.pre_sample_ticks} "
        f"uncovered_ticks={diagnostics.uncovered_ticks} "
        f"clipped_events={diagnostics.clipped_events}"
    )

    if args.stpf:
        stpf = footprint.compute_stpf(trace, power, args.pattern, args.tick_seconds)
        io.write_tef(stpf.watts, args.stpf)
    if args.forward_out or args.backward_out:
        forward, backward = accounting.split_passes(tef, args.backward_prefix)
        if args.forward_out:
            io.write_tef(forward, args.forward_out)
        if args.backward_out:
            io.write_tef(backward, args.backward_out)
    return 0


def cmd_summarize(args: argparse.Namespace) -> int:
    config = RunConfig((args.tef,), args.out, args.stdout)
    config.validate()
    tef = io.read_footprint(args.tef)
    stef = footprint.summarize(tef, args.pattern)
    _emit(io.render_footprint_json(stef), args.out, args.stdout)
    if args.top:
        for op, value, spread in footprint.top_k(stef, args.top):
            _say(f"{op.shorthand}\t{io.fmt_real(value)}\t{io.fmt_real(spread)}")
    return 0


def cmd_edd(args: argparse.Namespace) -> int:
    inputs = [args.tef] + ([args.topology] if args.topology else [])
    config = RunConfig(tuple(inputs), args.out, args.stdout)
    config.validate()
    tef = io.read_footprint(args.tef)
    topology = io.read_topology(args.topology) if args.topology else None
    diagram = footprint.to_edd(tef, topology)
    if args.format == "dot":
        _emit(io.render_edd_dot(diagram), args.out, args.stdout)
    else:
        _emit(io.render_edd_json(diagram), args.out, args.stdout)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    metric = similarity.Metric(args.metric)
    if args.matrix:
        if args.a or args.b:
            raise ParseError("--matrix cannot be combined with footprint arguments")
        if not (args.out or args.stdout):
            raise ParseError("matrix mode needs -o or --stdout")
        directory = Path(args.matrix)
        if not directory.is_dir():
            raise ParseError(f"not a directory: {directory}")
        paths = sorted(directory.glob("*.json"))
        if len(paths) < 2:
            raise ParseError(f"need at least 2 footprints in {directory}, found {len(paths)}")
        labeled = [(path.stem, io.read_footprint(path)) for path in paths]
        matrix = similarity.comparison_matrix(labeled, metric)
        _emit(io.render_matrix_csv(matrix), args.out, args.stdout)
        return 0

    if not (args.a and args.b):
        raise ParseError("compare needs two footprints or --matrix DIR")
    config = RunConfig((args.a, args.b), args.out, args.stdout)
    if not (args.out or args.stdout):
        config = RunConfig((args.a, args.b))
    config.validate()
    fa = io.read_footprint(args.a)
    fb = io.read_footprint(args.b)
    compare = similarity.pcc if metric is similarity.Metric.PCC else similarity.med
    result = compare(fa, fb)
    if result.degenerate:
        _say(f"{metric.value} degenerate (zero variance, n={result.n_keys})")
    else:
        _say(f"{metric.value} {io.fmt_real(result.value)} (n={result.n_keys})")
    if args.out or args.stdout:
        value = "null" if result.degenerate else io.fmt_real(result.value)
        content = (
            "{\n"
            f'  "metric": "{metric.value}",\n'
            f'  "value": {value},\n'
            f'  "n_keys": {result.n_keys},\n'
            f'  "degenerate": {str(result.degenerate).lower()}\n'
            "}\n"
        )
        _emit(content, args.out, args.stdout)
    return 0


def cmd_precision(args: argparse.Namespace) -> int:
    if args.mode == "asss":
        if not (args.events and args.power):
            raise ParseError("asss needs --events and --power")
        if not args.periods:
            raise ParseError("asss needs --periods")
        if args.base_period is None:
            raise ParseError("asss needs --base-period")
        config = RunConfig((args.events, args.power), args.out, args.stdout)
        config.validate()
        trace = io.read_events(args.events)
        power = io.read_power(args.power)
        periods = _parse_periods(args.periods)
        points = similarity.asss(
            trace, power, periods, args.base_period, args.pattern, args.tick_seconds
        )
        _emit(io.render_curve_csv("period", points), args.out, args.stdout)
    else:
        if not args.stefs:
            raise ParseError("assw needs --stefs")
        config = RunConfig(tuple(args.stefs), args.out, args.stdout)
        config.validate()
        stefs = [io.read_footprint(path) for path in args.stefs]
        if args.base:
            base = io.read_footprint(args.base)
        else:
            base = similarity.combine_mean(stefs)
        points = similarity.assw(stefs, base)
        _emit(io.render_curve_csv("n", points), args.out, args.stdout)
    for x, result in points:
        _say(f"{x}\t{'degenerate' if result.degenerate else io.fmt_real(result.value)}")
    return 0


def _parse_periods(text: str) -> list[int]:
    periods = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk.isdigit():
            raise ParseError(f"bad period {chunk!r} (expected a positive integer)")
        periods.append(int(chunk))
    return periods


def cmd_synth(args: argparse.Namespace) -> int:
    config = RunConfig((args.spec,))
    config.validate()
    spec = synth.SynthSpec.from_json(args.spec)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    trace, power, expected = synth.generate(spec)
    io.write_events(trace, outdir / "events.jsonl")
    io.write_power(power, outdir / "power.csv")
    io.write_tef(expected, outdir / "expected_tef.json")
    _say(
        f"generated {len(trace)} events on {len(power.devices())} device(s), "
        f"{sum(len(power[d]) for d in power.devices())} power samples"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jouletrace",
        description="Tensor-aware energy accounting over event and power traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_account = sub.add_parser(
        "account", help="attribute energy to tensor names from a trace pair"
    )
    p_account.add_argument("events", type=Path, help="events.jsonl input")
    p_account.add_argument("power", type=Path, help="power.csv input")
    _add_output_args(p_account)
    p_account.add_argument("--tick-seconds", type=float, default=accounting.DEFAULT_TICK_SECONDS,
                           help="physical length of one timestamp unit (default 1e-6)")
    p_account.add_argument("--naive", action="store_true",
                           help="run the per-tick reference instead of the sweep line")
    p_account.add_argument("--naive-tick-guard", type=int, default=DEFAULT_NAIVE_TICK_GUARD,
                           help="refuse --naive beyond this many flattened ticks")
    p_account.add_argument("--lenient", action="store_true",
                           help="skip malformed input lines instead of failing")
    p_account.add_argument("--stpf", type=Path, default=None,
                           help="also write the summarized power footprint here")
    p_account.add_argument("--pattern", default=footprint.DEFAULT_LAYER_PATTERN,
                           help="transformer-layer segment pattern for --stpf")
    p_account.add_argument("--forward-out", type=Path, default=None,
                           help="also write the forward-pass footprint here")
    p_account.add_argument("--backward-out", type=Path, default=None,
                           help="also write the backward-pass footprint here")
    p_account.add_argument("--backward-prefix", default="gradients",
                           help="top-level segment holding the backward pass")
    p_account.set_defaults(func=cmd_account)

    p_summarize = sub.add_parser(
        "summarize", help="collapse self-similar transformer layers"
    )
    p_summarize.add_argument("tef", type=Path, help="tef.json input")
    _add_output_args(p_summarize)
    p_summarize.add_argument("--pattern", default=footprint.DEFAULT_LAYER_PATTERN,
                             help="segment pattern marking a transformer layer")
    p_summarize.add_argument("--top", type=int, default=0,
                             help="print the top-N entries to standard error")
    p_summarize.set_defaults(func=cmd_summarize)

    p_edd = sub.add_parser("edd", help="rebuild the energy distribution diagram")
    p_edd.add_argument("tef", type=Path, help="tef.json or stef.json input")
    _add_output_args(p_edd)
    p_edd.add_argument("--format", choices=("json", "dot"), default="json")
    p_edd.add_argument("--topology", type=Path, default=None,
                       help="dataflow sidecar (parent/from/to records)")
    p_edd.set_defaults(func=cmd_edd)

    p_compare = sub.add_parser("compare", help="compare footprints (PCC or MED)")
    p_compare.add_argument("a", nargs="?", type=Path, help="first footprint")
    p_compare.add_argument("b", nargs="?", type=Path, help="second footprint")
    p_compare.add_argument("--matrix", type=Path, default=None,
                           help="directory of footprints for a pairwise matrix")
    p_compare.add_argument("--metric", choices=("pcc", "med"), default="pcc")
    _add_output_args(p_compare, required=False)
    p_compare.set_defaults(func=cmd_compare)

    p_precision = sub.add_parser(
        "precision", help="sampling-precision curves (sparsing and widening)"
    )
    p_precision.add_argument("--mode", choices=("asss", "assw"), required=True)
    p_precision.add_argument("--events", type=Path, default=None)
    p_precision.add_argument("--power", type=Path, default=None)
    p_precision.add_argument("--base-period", type=int, default=None,
                             help="period the power trace was sampled at (us)")
    p_precision.add_argument("--periods", default=None,
                             help="comma-separated sampling periods to test (us)")
    p_precision.add_argument("--stefs", nargs="+", type=Path, default=None,
                             help="per-run summarized footprints (assw)")
    p_precision.add_argument("--base", type=Path, default=None,
                             help="baseline footprint (assw; default: mean of all runs)")
    p_precision.add_argument("--pattern", default=footprint.DEFAULT_LAYER_PATTERN)
    p_precision.add_argument("--tick-seconds", type=float,
                             default=accounting.DEFAULT_TICK_SECONDS)
    _add_output_args(p_precision)
    p_precision.set_defaults(func=cmd_precision)

    p_synth = sub.add_parser("synth", help="generate a seeded synthetic trace pair")
    p_synth.add_argument("spec", type=Path, help="spec config (JSON)")
    p_synth.add_argument("--outdir", type=Path, required=True)
    p_synth.set_defaults(func=cmd_synth)

    return parser


def _configure_logging() -> None:
    level_name = os.environ.get(LOG_ENV_VAR, "warning").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        _say(f"error: {exc}")
        return 1
    except StructuralError as exc:
        _say(f"error: {exc}")
        return 2
    except OSError as exc:
        _say(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
