"""Core domain types for trace-based energy accounting.

Everything here is a value type: timestamps and durations are integer
microseconds, devices are (kind, index) pairs with a canonical label, and
tensor operations are identified by a qualified tensor name (QTN), the
slash-joined path of enclosing composite layers plus a terminal tensor name.
All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping

# Canonical time unit is the microsecond; ingestion converts everything to it.
MICROS_PER_SECOND = 1_000_000

# Reserved segment produced by footprint summarization; raw ingested traces
# must never contain it.
SUMMARY_SEGMENT = "transformer"


class ParseError(ValueError):
    """Malformed textual input (bad QTN, bad record, bad file)."""


class StructuralError(ValueError):
    """Well-formed input that violates a structural invariant."""


class DeviceKind(Enum):
    CPU = "cpu"
    GPU = "gpu"
    OTHER = "other"


@dataclass(frozen=True)
class DeviceId:
    """A compute device, e.g. ``cpu:0`` or ``gpu:1``.

    The label form is bijective with (kind, index); parsing is
    case-insensitive but only the lowercase spelling is canonical.
    """

    kind: DeviceKind
    index: int

    def __lt__(self, other: "DeviceId") -> bool:
        return (self.kind.value, self.index) < (other.kind.value, other.index)

    def __post_init__(self):
        if self.index < 0:
            raise ParseError(f"device index must be non-negative, got {self.index}")

    @property
    def label(self) -> str:
        return f"{self.kind.value}:{self.index}"

    @classmethod
    def parse(cls, label: str) -> "DeviceId":
        text = label.strip().lower()
        kind_name, sep, index_text = text.partition(":")
        if not sep:
            raise ParseError(f"device label {label!r} is missing ':'")
        try:
            kind = DeviceKind(kind_name)
        except ValueError:
            raise ParseError(
                f"device label {label!r} has unknown kind {kind_name!r} "
                f"(expected cpu, gpu or other)"
            ) from None
        if not index_text.isdigit():
            raise ParseError(f"device label {label!r} has non-numeric index")
        return cls(kind, int(index_text))

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class QualifiedTensorName:
    """A tensor operation site: nested composite-layer path plus tensor name.

    Round-trips exactly with its slash-joined shorthand, e.g.
    ``encoder/layer_0/output/dense/MatMul``.  Segments are non-empty and
    contain no ``/``; the path may be empty (a bare tensor name is legal).
    """

    path: tuple[str, ...]
    tensor: str

    def __post_init__(self):
        for pos, segment in enumerate((*self.path, self.tensor), start=1):
            if not segment:
                raise ParseError(f"empty segment at position {pos}")
            if "/" in segment:
                raise ParseError(f"segment at position {pos} contains '/': {segment!r}")

    @classmethod
    def parse(cls, shorthand: str) -> "QualifiedTensorName":
        if not shorthand:
            raise ParseError("empty tensor name")
        segments = shorthand.split("/")
        for pos, segment in enumerate(segments, start=1):
            if not segment:
                raise ParseError(
                    f"empty segment at position {pos} in tensor name {shorthand!r}"
                )
        return cls(tuple(segments[:-1]), segments[-1])

    @property
    def shorthand(self) -> str:
        return "/".join((*self.path, self.tensor))

    @property
    def segments(self) -> tuple[str, ...]:
        return (*self.path, self.tensor)

    def __str__(self) -> str:
        return self.shorthand

    def __lt__(self, other: "QualifiedTensorName") -> bool:
        return self.shorthand < other.shorthand


# Shorthand alias used throughout; a summarized name (SQTN) has the same
# shape, with path segments possibly rewritten to the reserved token.
QTN = QualifiedTensorName


def parse_qtn(shorthand: str) -> QTN:
    return QualifiedTensorName.parse(shorthand)


def render_qtn(qtn: QTN) -> str:
    return qtn.shorthand


@dataclass(frozen=True)
class TensorEvent:
    """One durable tensor-operation occurrence on one device.

    Covers the closed tick range {ts, ts+1, ..., ts+dur} at microsecond
    granularity.
    """

    ts: int
    dur: int
    device: DeviceId
    op: QTN

    def __post_init__(self):
        if self.ts < 0:
            raise StructuralError(f"event start must be non-negative, got {self.ts}")
        if self.dur < 1:
            raise StructuralError(f"event duration must be >= 1 us, got {self.dur}")

    @property
    def end(self) -> int:
        """Last covered tick (inclusive)."""
        return self.ts + self.dur


@dataclass(frozen=True)
class EventTrace:
    """Tensor events in ingestion order; no global sortedness is assumed."""

    events: tuple[TensorEvent, ...]

    def __init__(self, events: Iterable[TensorEvent] = ()):
        object.__setattr__(self, "events", tuple(events))

    def __iter__(self) -> Iterator[TensorEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def devices(self) -> list[DeviceId]:
        return sorted({e.device for e in self.events})

    def for_device(self, device: DeviceId) -> "EventTrace":
        return EventTrace(e for e in self.events if e.device == device)


@dataclass(frozen=True)
class PowerSample:
    """One instantaneous power reading.

    ``fraction`` is the attribution share of the reading that belongs to the
    monitored workload (1.0 unless the sampler virtualizes power between
    co-running processes); effective power is ``watts * fraction``.
    """

    ts: int
    watts: float
    fraction: float = 1.0

    def __post_init__(self):
        if self.ts < 0:
            raise StructuralError(f"sample timestamp must be non-negative, got {self.ts}")
        if not (math.isfinite(self.watts) and self.watts >= 0.0):
            raise StructuralError(f"watts must be finite and non-negative, got {self.watts}")
        if not 0.0 <= self.fraction <= 1.0:
            raise StructuralError(f"fraction must be in [0, 1], got {self.fraction}")

    @property
    def effective_watts(self) -> float:
        return self.watts * self.fraction


@dataclass(frozen=True)
class DevicePowerTrace:
    """Per-device power samples, sorted by timestamp, timestamps unique."""

    traces: Mapping[DeviceId, tuple[PowerSample, ...]] = field(default_factory=dict)

    def __init__(self, traces: Mapping[DeviceId, Iterable[PowerSample]] | None = None):
        cleaned: dict[DeviceId, tuple[PowerSample, ...]] = {}
        for device, samples in (traces or {}).items():
            ordered = tuple(sorted(samples, key=lambda s: s.ts))
            for prev, cur in zip(ordered, ordered[1:]):
                if prev.ts == cur.ts:
                    raise StructuralError(
                        f"duplicate power timestamp {cur.ts} on device {device}"
                    )
            if ordered:
                cleaned[device] = ordered
        object.__setattr__(self, "traces", cleaned)

    def __contains__(self, device: DeviceId) -> bool:
        return device in self.traces

    def __getitem__(self, device: DeviceId) -> tuple[PowerSample, ...]:
        return self.traces[device]

    def devices(self) -> list[DeviceId]:
        return sorted(self.traces)

    def for_device(self, device: DeviceId) -> "DevicePowerTrace":
        if device not in self.traces:
            return DevicePowerTrace()
        return DevicePowerTrace({device: self.traces[device]})

    def sample_at(self, device: DeviceId, ts: int) -> PowerSample:
        """Most recent sample at or before ``ts`` (clamped to the earliest)."""
        samples = self.traces[device]
        pos = bisect.bisect_right([s.ts for s in samples], ts)
        return samples[max(pos - 1, 0)]
