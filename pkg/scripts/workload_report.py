#!/usr/bin/env python3
"""End-to-end report for a synthetic training-style workload.

Generates a seeded workload with forward and backward passes, accounts it,
and writes: the raw and summarized footprints, forward/backward splits, the
summarized power footprint, a top-k ranking, and the energy distribution
diagram in DOT form.
"""

import argparse
from pathlib import Path

from jouletrace import io
from jouletrace.accounting import gen_footprint_optimized, split_passes
from jouletrace.footprint import compute_stpf, summarize, to_edd, top_k
from jouletrace.synth import PowerModel, SynthSpec, generate


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", type=Path, required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--top", type=int, default=10)
    args = parser.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)

    spec = SynthSpec(
        seed=args.seed,
        devices=("cpu:0", "gpu:0"),
        layers=6,
        tensors_per_layer=3,
        dur_min=30,
        dur_max=600,
        gap_max=100,
        concurrency=3,
        period=100,
        power=PowerModel("ramp", w0=4.0, slope=600.0),
        include_backward=True,
    )
    trace, power, _ = generate(spec)
    io.write_events(trace, args.outdir / "events.jsonl")
    io.write_power(power, args.outdir / "power.csv")

    tef, diagnostics = gen_footprint_optimized(trace, power)
    io.write_tef(tef, args.outdir / "tef.json")
    print(f"{len(tef)} tensor names, diagnostics: {diagnostics}")

    forward, backward = split_passes(tef)
    io.write_tef(forward, args.outdir / "tef_forward.json")
    io.write_tef(backward, args.outdir / "tef_backward.json")
    print(f"forward {sum(forward.values()):.6g} J, backward {sum(backward.values()):.6g} J")

    stef = summarize(tef)
    io.write_stef(stef, args.outdir / "stef.json")
    io.write_edd(to_edd(stef), args.outdir / "edd.dot", fmt="dot")

    stpf = compute_stpf(trace, power)
    io.write_tef(stpf.watts, args.outdir / "stpf.json")
    print(f"top {args.top} by energy:")
    for op, joules, _ in top_k(stef, args.top):
        print(f"  {op.shorthand}\t{io.fmt_real(joules)} J\t{io.fmt_real(stpf.watts.get(op, 0.0))} W")
    print(f"wrote artifacts to {args.outdir}")


if __name__ == "__main__":
    main()
