"""Footprint comparison and precision metrics.

Footprints are compared over the union of their key sets with missing keys
valued 0, so structural divergence (a tensor present in only one variant)
lowers similarity instead of being silently dropped.

* ``pcc`` is the Pearson correlation of two footprints (accounting
  similarity); zero-variance inputs yield a flagged degenerate result
  instead of NaN.
* ``med`` is the mean, over the key union, of first-minus-second values;
  antisymmetric in its arguments.
* ``asss`` lengthens the power sampling period and correlates each
  re-accounted summarized footprint against the base-period one.
* ``assw`` widens the number of combined runs and correlates each prefix
  mean against a baseline.
* ``comparison_matrix`` / ``stability_matrix`` assemble labeled pairwise
  grids of either metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from . import accounting, footprint
from .accounting import TEF
from .model import (
    DevicePowerTrace,
    EventTrace,
    PowerSample,
    StructuralError,
)


class Metric(Enum):
    PCC = "pcc"
    MED = "med"


@dataclass(frozen=True)
class ComparisonResult:
    """Outcome of one footprint comparison.

    ``value`` is None exactly when ``degenerate`` is set (zero-variance
    PCC); ``n_keys`` is the size of the key union the metric ran over.
    """

    metric: Metric
    value: float | None
    n_keys: int
    degenerate: bool = False


@dataclass(frozen=True)
class SimilarityMatrix:
    labels: tuple[str, ...]
    cells: tuple[tuple[ComparisonResult, ...], ...]


def _union_vectors(a: TEF, b: TEF) -> tuple[list[float], list[float], int]:
    keys = sorted(set(a) | set(b))
    return [a.get(k, 0.0) for k in keys], [b.get(k, 0.0) for k in keys], len(keys)


def pcc(a: TEF, b: TEF) -> ComparisonResult:
    """Pearson correlation over the key union, missing keys valued 0."""
    va, vb, n = _union_vectors(a, b)
    if n < 2:
        raise StructuralError(f"pcc needs a key union of at least 2, got {n}")
    mean_a = math.fsum(va) / n
    mean_b = math.fsum(vb) / n
    da = [x - mean_a for x in va]
    db = [x - mean_b for x in vb]
    var_a = math.fsum(x * x for x in da)
    var_b = math.fsum(x * x for x in db)
    if var_a == 0.0 or var_b == 0.0:
        return ComparisonResult(Metric.PCC, None, n, degenerate=True)
    if va == vb:
        # correlation of a vector with itself is exactly 1
        return ComparisonResult(Metric.PCC, 1.0, n)
    value = math.fsum(x * y for x, y in zip(da, db)) / (math.sqrt(var_a) * math.sqrt(var_b))
    return ComparisonResult(Metric.PCC, max(-1.0, min(1.0, value)), n)


def med(a: TEF, b: TEF) -> ComparisonResult:
    """Mean error difference: mean over the key union of a[k] - b[k]."""
    va, vb, n = _union_vectors(a, b)
    if n == 0:
        return ComparisonResult(Metric.MED, 0.0, 0)
    value = math.fsum(x - y for x, y in zip(va, vb)) / n
    return ComparisonResult(Metric.MED, value, n)


def combine_mean(footprints: list[TEF]) -> TEF:
    """Element-wise mean over the key union, missing keys valued 0.

    When every contribution for a key is identical the mean is that exact
    value, so combining copies of one footprint reproduces it bit-for-bit.
    """
    if not footprints:
        return {}
    keys = sorted({k for f in footprints for k in f})
    combined: TEF = {}
    for key in keys:
        values = [f.get(key, 0.0) for f in footprints]
        first = values[0]
        if all(v == first for v in values):
            combined[key] = first
        else:
            combined[key] = math.fsum(values) / len(values)
    return combined


def downsample_power(
    power: DevicePowerTrace, period: int
) -> DevicePowerTrace:
    """Keep only the latest sample in each period-aligned bin, per device."""
    if period < 1:
        raise StructuralError(f"period must be >= 1 us, got {period}")
    kept: dict = {}
    for device in power.devices():
        winners: dict[int, PowerSample] = {}
        for sample in power[device]:
            winners[sample.ts // period] = sample  # samples arrive sorted
        kept[device] = [winners[b] for b in sorted(winners)]
    return DevicePowerTrace(kept)


def asss(
    trace: EventTrace,
    power: DevicePowerTrace,
    periods: list[int],
    base_period: int,
    pattern: str = footprint.DEFAULT_LAYER_PATTERN,
    tick_seconds: float = accounting.DEFAULT_TICK_SECONDS,
) -> list[tuple[int, ComparisonResult]]:
    """Accounting similarity under sample sparsing.

    The base footprint uses the power trace as given; each requested period
    downsamples the trace, re-runs accounting and summarization, and
    correlates against the base. The base period itself is the identity
    downsample and compares the base with itself.
    """
    if not periods:
        raise StructuralError("asss needs at least one period")
    for period in periods:
        if period < base_period:
            raise StructuralError(
                f"period {period} is shorter than the base period {base_period}"
            )
    base_tef, _ = accounting.gen_footprint_optimized(trace, power, tick_seconds)
    base = footprint.summarize(base_tef, pattern)
    points = []
    for period in periods:
        if period == base_period:
            points.append((period, pcc(base, base)))
            continue
        sparse = downsample_power(power, period)
        tef, _ = accounting.gen_footprint_optimized(trace, sparse, tick_seconds)
        points.append((period, pcc(base, footprint.summarize(tef, pattern))))
    return points


def assw(stefs: list[TEF], base: TEF) -> list[tuple[int, ComparisonResult]]:
    """Accounting similarity under sample widening.

    For each prefix size n, the first n footprints are combined by
    element-wise mean and correlated against the baseline.
    """
    if not stefs:
        raise StructuralError("assw needs at least one footprint")
    return [
        (n, pcc(combine_mean(stefs[:n]), base))
        for n in range(1, len(stefs) + 1)
    ]


def comparison_matrix(
    labeled: list[tuple[str, TEF]], metric: Metric = Metric.PCC
) -> SimilarityMatrix:
    """Full pairwise grid; cell (i, j) compares footprint i against j."""
    if len(labeled) < 2:
        raise StructuralError("a comparison matrix needs at least 2 footprints")
    compare = pcc if metric is Metric.PCC else med
    labels = tuple(label for label, _ in labeled)
    cells = tuple(
        tuple(compare(fa, fb) for _, fb in labeled) for _, fa in labeled
    )
    return SimilarityMatrix(labels, cells)


def stability_matrix(labeled: list[tuple[str, TEF]]) -> SimilarityMatrix:
    """Pairwise PCC between repeated experiments."""
    return comparison_matrix(labeled, Metric.PCC)
