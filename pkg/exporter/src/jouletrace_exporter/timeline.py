"""Convert profiler timeline exports to the canonical events.jsonl format.

The input is a trace-event collection as produced by the TensorFlow
profiler's timeline API (Chrome trace-event JSON): either a top-level list
of records or an object with a ``traceEvents`` list. Only complete-duration
records (phase ``"X"``) become canonical events; everything else is skipped
and counted. ``process_name`` metadata records name the per-pid lanes.

Lane mapping is explicit: the caller provides a map from lane label (the
``process_name`` string, or ``pid:<n>`` when unnamed) to a canonical device
label such as ``cpu:0``. Records in unmapped lanes are skipped and the lane
is listed in the summary; strict mode turns that into a failure.

Accepted records convert losslessly: the canonical record carries the
identical integer ts/dur, so records with fractional timestamps are skipped
rather than rounded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class ConversionError(ValueError):
    pass


# Segment reserved by the downstream summarizer; raw traces must not use it.
RESERVED_SEGMENT = "transformer"


@dataclass
class TimelineSummary:
    converted: int = 0
    skipped_phase: int = 0
    skipped_zero_duration: int = 0
    skipped_fractional_time: int = 0
    skipped_invalid: int = 0
    skipped_unmapped_lane: int = 0
    rejected_reserved_segment: int = 0
    unmapped_lanes: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"converted {self.converted} event(s)"]
        for label, count in (
            ("non-complete phase", self.skipped_phase),
            ("zero duration", self.skipped_zero_duration),
            ("fractional time", self.skipped_fractional_time),
            ("invalid record", self.skipped_invalid),
            ("unmapped lane", self.skipped_unmapped_lane),
            (f"reserved '{RESERVED_SEGMENT}' segment", self.rejected_reserved_segment),
        ):
            if count:
                out.append(f"skipped {count} record(s): {label}")
        for lane in self.unmapped_lanes:
            out.append(f"unmapped lane: {lane}")
        return out


def _as_int_micros(value) -> int | None:
    """Integer microseconds, or None when the value would lose precision."""
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return None


def _load_records(path: Path) -> list:
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConversionError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if isinstance(payload, dict):
        payload = payload.get("traceEvents")
    if not isinstance(payload, list):
        raise ConversionError(
            f"{path}: expected a trace-event list or an object with 'traceEvents'"
        )
    return payload


def _valid_op(name: str) -> bool:
    segments = name.split("/")
    return all(segments) and bool(segments)


def convert_timeline(
    in_path: str | Path,
    device_map: dict[str, str],
    out_path: str | Path,
    strict: bool = False,
) -> TimelineSummary:
    in_path, out_path = Path(in_path), Path(out_path)
    records = _load_records(in_path)
    summary = TimelineSummary()

    lane_names: dict[object, str] = {}
    for record in records:
        if (
            isinstance(record, dict)
            and record.get("ph") == "M"
            and record.get("name") == "process_name"
        ):
            name = (record.get("args") or {}).get("name")
            if isinstance(name, str):
                lane_names[record.get("pid")] = name

    unmapped: dict[str, None] = {}  # ordered set of lane labels
    lines: list[str] = []
    for record in records:
        if not isinstance(record, dict):
            summary.skipped_invalid += 1
            continue
        if record.get("ph") != "X":
            summary.skipped_phase += 1
            continue
        ts = _as_int_micros(record.get("ts"))
        dur = _as_int_micros(record.get("dur"))
        if ts is None or dur is None:
            if isinstance(record.get("ts"), float) or isinstance(record.get("dur"), float):
                summary.skipped_fractional_time += 1
            else:
                summary.skipped_invalid += 1
            continue
        if dur < 1:
            summary.skipped_zero_duration += 1
            continue
        name = record.get("name")
        if not isinstance(name, str) or ts < 0 or not _valid_op(name):
            summary.skipped_invalid += 1
            continue
        if RESERVED_SEGMENT in name.split("/"):
            summary.rejected_reserved_segment += 1
            continue
        pid = record.get("pid")
        lane = lane_names.get(pid, f"pid:{pid}")
        device = device_map.get(lane)
        if device is None:
            summary.skipped_unmapped_lane += 1
            unmapped[lane] = None
            continue
        lines.append(
            '{"ts": %d, "dur": %d, "device": %s, "op": %s}'
            % (ts, dur, json.dumps(device.strip().lower()), json.dumps(name))
        )
        summary.converted += 1

    summary.unmapped_lanes = list(unmapped)
    if strict and summary.unmapped_lanes:
        raise ConversionError(
            "unmapped lane(s): " + ", ".join(summary.unmapped_lanes)
        )

    with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("".join(line + "\n" for line in lines))
    return summary
