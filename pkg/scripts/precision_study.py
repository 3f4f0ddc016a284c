#!/usr/bin/env python3
"""Sampling-precision study on a synthetic workload.

Generates a seeded two-phase workload, then sweeps:
  * sparsing: accounting similarity while the sampling period lengthens,
  * widening: similarity of prefix-mean footprints from noisy repeated runs,
  * stability: pairwise similarity matrix across the noisy runs.

Writes asss.csv, assw.csv and stability.csv into --outdir.
"""

import argparse
import random
from pathlib import Path

from jouletrace import io
from jouletrace.accounting import gen_footprint_optimized
from jouletrace.footprint import summarize
from jouletrace.similarity import assw, asss, combine_mean, stability_matrix
from jouletrace.synth import PowerModel, SynthSpec, generate


def noisy_runs(stef, n_runs, rng, noise=0.12):
    return [
        {op: joules * rng.uniform(1 - noise, 1 + noise) for op, joules in stef.items()}
        for _ in range(n_runs)
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", type=Path, required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--runs", type=int, default=8)
    args = parser.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)

    spec = SynthSpec(
        seed=args.seed,
        devices=("cpu:0", "gpu:0"),
        layers=4,
        tensors_per_layer=3,
        dur_min=20,
        dur_max=400,
        gap_max=80,
        concurrency=2,
        period=50,
        power=PowerModel("two_phase", w_low=6.0, w_high=28.0, switch_ts=4000),
        include_backward=True,
    )
    trace, power, _ = generate(spec)

    periods = [spec.period * m for m in (1, 2, 4, 8, 16, 32)]
    points = asss(trace, power, periods, base_period=spec.period)
    (args.outdir / "asss.csv").write_text(io.render_curve_csv("period", points))
    for period, result in points:
        print(f"asss period={period}us pcc={result.value}")

    tef, _ = gen_footprint_optimized(trace, power)
    stef = summarize(tef)
    rng = random.Random(args.seed + 1)
    runs = noisy_runs(stef, args.runs, rng)
    widen = assw(runs, combine_mean(runs))
    (args.outdir / "assw.csv").write_text(io.render_curve_csv("n", widen))
    for n, result in widen:
        print(f"assw n={n} pcc={result.value}")

    matrix = stability_matrix([(f"run{i}", run) for i, run in enumerate(runs)])
    io.write_matrix(matrix, args.outdir / "stability.csv")
    print(f"wrote {args.outdir}/asss.csv, assw.csv, stability.csv")


if __name__ == "__main__":
    main()
