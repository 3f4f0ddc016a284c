"""Trace alignment and per-tensor energy attribution.

Two interchangeable engines produce a tensor energy footprint (TEF, a map
from qualified tensor name to joules) from an event trace and a per-device
power trace:

* ``gen_footprint_naive`` literally flattens every event into its covered
  microsecond ticks and attributes each tick's energy; it is the reference
  used as a test oracle and is only practical for small traces.
* ``gen_footprint_optimized`` sweeps event and sample boundaries so each
  elementary interval with a constant active multiset is handled in O(1)
  per active tensor name; it must agree with the naive path to 1e-9
  relative on every input.

Attribution rules shared by both engines:

* an event covers the closed tick range {ts .. ts+dur} (dur+1 ticks);
* a tick's power comes from the most recent sample at or before it
  (recency alignment); ticks before the first sample borrow the earliest
  sample and are counted in diagnostics;
* all operation occurrences active at a tick on one device split that
  tick's energy equally (a multiset: two concurrent occurrences of the same
  name receive two shares);
* ticks on devices without any power trace attribute nothing and are
  counted in diagnostics.
"""

from __future__ import annotations

import bisect
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .model import (
    MICROS_PER_SECOND,
    DeviceId,
    DevicePowerTrace,
    EventTrace,
    QTN,
    StructuralError,
)

DEFAULT_TICK_SECONDS = 1.0 / MICROS_PER_SECOND

# map: device -> tick -> multiset of active op occurrences
DeviceFlatTrace = dict[DeviceId, dict[int, Counter]]
# map: tick -> op -> joules (accumulated across devices)
TickFootprint = dict[int, dict[QTN, float]]
# map: op -> joules
TEF = dict[QTN, float]


@dataclass
class AccountingDiagnostics:
    """Counters for imperfect alignment, reported alongside every TEF."""

    pre_sample_ticks: int = 0
    uncovered_ticks: int = 0
    clipped_events: int = 0

    def merge(self, other: "AccountingDiagnostics") -> None:
        self.pre_sample_ticks += other.pre_sample_ticks
        self.uncovered_ticks += other.uncovered_ticks
        self.clipped_events += other.clipped_events


def now(t: int, sample_ts: list[int]) -> tuple[int, bool]:
    """Largest sample timestamp <= t, with a pre-sample flag.

    When every sample lies after ``t`` the earliest sample is returned and
    the flag is True so callers can count the clamped alignment.
    """
    index, pre_sample = _now_index(t, sample_ts)
    return sample_ts[index], pre_sample


def _now_index(t: int, sample_ts: list[int]) -> tuple[int, bool]:
    if not sample_ts:
        raise StructuralError("now() requires at least one sample timestamp")
    pos = bisect.bisect_right(sample_ts, t)
    if pos == 0:
        return 0, True
    return pos - 1, False


def flatten(trace: EventTrace) -> DeviceFlatTrace:
    """Expand durable events into per-tick multisets of active occurrences."""
    flat: DeviceFlatTrace = defaultdict(lambda: defaultdict(Counter))
    for event in trace:
        per_device = flat[event.device]
        for tick in range(event.ts, event.ts + event.dur + 1):
            per_device[tick][event.op] += 1
    return {device: dict(ticks) for device, ticks in flat.items()}


def build_tick_footprint(
    ops: Counter, power_watts: float, tick_seconds: float = DEFAULT_TICK_SECONDS
) -> dict[QTN, float]:
    """Split one tick's energy equally among the active occurrences.

    Each occurrence receives ``power * tick_seconds / total occurrences``;
    occurrences of the same name accumulate.
    """
    total = sum(ops.values())
    if total == 0:
        raise StructuralError("cannot attribute a tick with no active operations")
    if power_watts < 0:
        raise StructuralError(f"negative power {power_watts}")
    share = power_watts * tick_seconds / total
    return {op: share * count for op, count in ops.items()}


def gen_footprint_naive(
    trace: EventTrace,
    power: DevicePowerTrace,
    tick_seconds: float = DEFAULT_TICK_SECONDS,
) -> tuple[TickFootprint, AccountingDiagnostics]:
    """Reference accounting: attribute every covered tick individually.

    Cost grows with total flattened ticks; intended for oracles and small
    audits, not production traces.
    """
    diagnostics = AccountingDiagnostics()
    tick_footprint: TickFootprint = {}
    flat = flatten(trace)
    for device in sorted(flat):
        ticks = flat[device]
        if device not in power:
            diagnostics.uncovered_ticks += len(ticks)
            continue
        sample_ts = [s.ts for s in power[device]]
        for tick in sorted(ticks):
            index, pre_sample = _now_index(tick, sample_ts)
            if pre_sample:
                diagnostics.pre_sample_ticks += 1
            sample = power[device][index]
            shares = build_tick_footprint(ticks[tick], sample.effective_watts, tick_seconds)
            sink = tick_footprint.setdefault(tick, {})
            for op, joules in shares.items():
                sink[op] = sink.get(op, 0.0) + joules
    return tick_footprint, diagnostics


def aggregate(tick_footprint: TickFootprint) -> TEF:
    """Sum per-tick attributions into a tensor energy footprint."""
    tef: TEF = {}
    for tick in sorted(tick_footprint):
        for op, joules in tick_footprint[tick].items():
            tef[op] = tef.get(op, 0.0) + joules
    return tef


@dataclass
class _SweepResult:
    tef: TEF = field(default_factory=dict)
    active_seconds: dict[QTN, float] = field(default_factory=dict)
    attributed_joules: float = 0.0
    diagnostics: AccountingDiagnostics = field(default_factory=AccountingDiagnostics)


def _sweep_device(
    events: list, samples: tuple, tick_seconds: float
) -> _SweepResult:
    """Sweep one device's event/sample boundaries.

    Boundaries are event starts, event ends + 1 (first tick no longer
    covered) and sample timestamps; between consecutive boundaries the
    active multiset and the aligned sample are both constant.
    """
    result = _SweepResult()
    deltas: dict[int, Counter] = defaultdict(Counter)
    bounds = set()
    for event in events:
        deltas[event.ts][event.op] += 1
        deltas[event.end + 1][event.op] -= 1
        bounds.add(event.ts)
        bounds.add(event.end + 1)

    covered = samples is not None
    sample_ts: list[int] = [s.ts for s in samples] if covered else []
    if covered:
        bounds.update(sample_ts)
    ordered = sorted(bounds)

    active: Counter = Counter()
    total_active = 0
    for left, right in zip(ordered, ordered[1:] + [None]):
        for op, delta in deltas.get(left, {}).items():
            active[op] += delta
            total_active += delta
            if active[op] == 0:
                del active[op]
        if right is None or total_active == 0:
            continue
        n_ticks = right - left
        if not covered:
            result.diagnostics.uncovered_ticks += n_ticks
            continue
        index, pre_sample = _now_index(left, sample_ts)
        if pre_sample:
            result.diagnostics.pre_sample_ticks += n_ticks
        sample = samples[index]
        interval_joules = sample.effective_watts * tick_seconds * n_ticks
        interval_seconds = tick_seconds * n_ticks
        for op, count in active.items():
            result.tef[op] = result.tef.get(op, 0.0) + interval_joules * count / total_active
            result.active_seconds[op] = (
                result.active_seconds.get(op, 0.0) + interval_seconds * count
            )
        result.attributed_joules += interval_joules
    return result


def _sweep(
    trace: EventTrace, power: DevicePowerTrace, tick_seconds: float
) -> tuple[TEF, dict[QTN, float], dict[DeviceId, float], AccountingDiagnostics]:
    per_device_events: dict[DeviceId, list] = defaultdict(list)
    for event in trace:
        per_device_events[event.device].append(event)

    tef: TEF = {}
    active_seconds: dict[QTN, float] = {}
    device_joules: dict[DeviceId, float] = {}
    diagnostics = AccountingDiagnostics()
    for device in sorted(per_device_events):
        samples = power[device] if device in power else None
        result = _sweep_device(per_device_events[device], samples, tick_seconds)
        diagnostics.merge(result.diagnostics)
        if samples is not None:
            device_joules[device] = result.attributed_joules
        for op, joules in result.tef.items():
            tef[op] = tef.get(op, 0.0) + joules
        for op, seconds in result.active_seconds.items():
            active_seconds[op] = active_seconds.get(op, 0.0) + seconds
    return tef, active_seconds, device_joules, diagnostics


def gen_footprint_optimized(
    trace: EventTrace,
    power: DevicePowerTrace,
    tick_seconds: float = DEFAULT_TICK_SECONDS,
) -> tuple[TEF, AccountingDiagnostics]:
    """Sweep-line accounting; numerically equivalent to the naive reference."""
    tef, _, _, diagnostics = _sweep(trace, power, tick_seconds)
    return tef, diagnostics


def active_time(
    trace: EventTrace,
    power: DevicePowerTrace,
    tick_seconds: float = DEFAULT_TICK_SECONDS,
) -> dict[QTN, float]:
    """Per-name occupancy in seconds, one full tick per occurrence per tick.

    Only ticks on power-covered devices count, mirroring energy attribution.
    """
    _, seconds, _, _ = _sweep(trace, power, tick_seconds)
    return seconds


def device_energy_totals(
    trace: EventTrace,
    power: DevicePowerTrace,
    tick_seconds: float = DEFAULT_TICK_SECONDS,
) -> dict[DeviceId, float]:
    """Total joules attributed per power-covered device."""
    _, _, totals, _ = _sweep(trace, power, tick_seconds)
    return totals


def flattened_tick_count(trace: EventTrace) -> int:
    """Total ticks the naive reference would visit (occurrence-weighted)."""
    return sum(event.dur + 1 for event in trace)


def split_passes(tef: TEF, backward_prefix: str = "gradients") -> tuple[TEF, TEF]:
    """Partition a footprint into forward and backward passes.

    Entries whose first path segment equals ``backward_prefix`` form the
    backward pass; everything else is forward.
    """
    forward: TEF = {}
    backward: TEF = {}
    for op, joules in tef.items():
        if op.path and op.path[0] == backward_prefix:
            backward[op] = joules
        else:
            forward[op] = joules
    return forward, backward
