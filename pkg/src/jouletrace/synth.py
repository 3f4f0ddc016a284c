"""Seeded synthetic event/power trace pairs with known footprints.

The generator emits a BERT-like nesting (``root/encoder/layer_i/unit_j/Name``)
so layer summarization, diagram reconstruction and pass splitting are all
exercised by the one spec family. The returned expected footprint is always
computed by the naive per-tick reference, never by the optimized engine, so
generated instances double as oracle fixtures.

Determinism: ``generate`` is a pure function of the spec, seed included.
Sample watt values are quantized to the canonical 9-significant-digit
rendering at generation time, so writing and re-reading a generated power
trace is lossless.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, fields
from pathlib import Path

from . import accounting
from .accounting import TEF
from .io import fmt_real
from .model import (
    DeviceId,
    DevicePowerTrace,
    EventTrace,
    ParseError,
    PowerSample,
    QualifiedTensorName,
    TensorEvent,
)

# Tensor vocabulary instantiated inside every generated unit.
TENSOR_NAMES = ("MatMul", "BiasAdd")

BACKWARD_PREFIX = "gradients"

POWER_MODEL_KINDS = ("constant", "two_phase", "ramp")


def _quantize(watts: float) -> float:
    return max(0.0, float(fmt_real(watts)))


@dataclass(frozen=True)
class PowerModel:
    """Instantaneous power as a function of trace time.

    ``constant`` holds ``watts``; ``two_phase`` reads ``w_low`` before
    ``switch_ts`` and ``w_high`` from it on; ``ramp`` starts at ``w0`` and
    adds ``slope`` watts per second, clamped at zero.
    """

    kind: str = "constant"
    watts: float = 10.0
    w_low: float = 5.0
    w_high: float = 15.0
    switch_ts: int = 0
    w0: float = 5.0
    slope: float = 1.0

    def __post_init__(self):
        if self.kind not in POWER_MODEL_KINDS:
            raise ParseError(
                f"power.kind must be one of {', '.join(POWER_MODEL_KINDS)}, got {self.kind!r}"
            )
        for name in ("watts", "w_low", "w_high", "w0"):
            if getattr(self, name) < 0:
                raise ParseError(f"power.{name} must be non-negative")

    def power_at(self, ts: int) -> float:
        if self.kind == "constant":
            return _quantize(self.watts)
        if self.kind == "two_phase":
            return _quantize(self.w_low if ts < self.switch_ts else self.w_high)
        return _quantize(self.w0 + self.slope * (ts / 1_000_000.0))

    @classmethod
    def from_dict(cls, payload: dict) -> "PowerModel":
        known = {f.name for f in fields(cls)}
        for key in payload:
            if key not in known:
                raise ParseError(f"unknown power model field {key!r}")
        return cls(**payload)


@dataclass(frozen=True)
class SynthSpec:
    """Workload shape: layers, units per layer, timing, devices, power."""

    seed: int = 0
    devices: tuple[str, ...] = ("cpu:0",)
    layers: int = 2
    tensors_per_layer: int = 2
    dur_min: int = 1
    dur_max: int = 200
    gap_max: int = 50
    concurrency: int = 1
    period: int = 100
    power: PowerModel = PowerModel()
    root: str = "net"
    include_backward: bool = False

    def __post_init__(self):
        for name in ("layers", "tensors_per_layer", "concurrency"):
            if getattr(self, name) < 1:
                raise ParseError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.dur_min < 1:
            raise ParseError(f"dur_min must be >= 1 us, got {self.dur_min}")
        if self.dur_max < self.dur_min:
            raise ParseError(f"dur_max must be >= dur_min, got {self.dur_max}")
        if self.gap_max < 0:
            raise ParseError(f"gap_max must be >= 0, got {self.gap_max}")
        if self.period < 1:
            raise ParseError(f"period must be >= 1 us, got {self.period}")
        if not self.devices:
            raise ParseError("devices must not be empty")
        if not self.root or "/" in self.root:
            raise ParseError(f"root must be a single non-empty segment, got {self.root!r}")
        object.__setattr__(self, "devices", tuple(self.devices))

    @classmethod
    def from_dict(cls, payload: dict) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        for key in payload:
            if key not in known:
                raise ParseError(f"unknown spec field {key!r}")
        payload = dict(payload)
        if "power" in payload:
            if not isinstance(payload["power"], dict):
                raise ParseError("spec field 'power' must be an object")
            payload["power"] = PowerModel.from_dict(payload["power"])
        if "devices" in payload:
            payload["devices"] = tuple(payload["devices"])
        try:
            return cls(**payload)
        except TypeError as exc:
            raise ParseError(f"bad spec: {exc}") from None

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthSpec":
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as handle:
                payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(payload, dict):
            raise ParseError(f"{path}: spec must be a JSON object")
        return cls.from_dict(payload)

    def op_names(self) -> list[QualifiedTensorName]:
        """Every tensor operation site the generated trace instantiates."""
        names = []
        for layer in range(self.layers):
            for unit in range(self.tensors_per_layer):
                for tensor in TENSOR_NAMES:
                    base = (self.root, "encoder", f"layer_{layer}", f"unit_{unit}")
                    names.append(QualifiedTensorName(base, tensor))
                    if self.include_backward:
                        names.append(QualifiedTensorName((BACKWARD_PREFIX, *base), tensor))
        return names


def generate(spec: SynthSpec) -> tuple[EventTrace, DevicePowerTrace, TEF]:
    """Deterministic trace pair plus its naive-reference footprint."""
    rng = random.Random(spec.seed)
    devices = [DeviceId.parse(label) for label in spec.devices]

    ops = spec.op_names()
    rng.shuffle(ops)
    lanes = [(device, lane) for device in devices for lane in range(spec.concurrency)]
    clocks = {lane: 0 for lane in lanes}

    events = []
    for index, op in enumerate(ops):
        lane = lanes[index % len(lanes)]
        start = clocks[lane] + rng.randint(0, spec.gap_max)
        dur = rng.randint(spec.dur_min, spec.dur_max)
        events.append(TensorEvent(start, dur, lane[0], op))
        clocks[lane] = start + dur + 1
    trace = EventTrace(events)

    horizon = max(event.end for event in trace) + spec.period
    per_device = {}
    for device in devices:
        samples = [
            PowerSample(ts, spec.power.power_at(ts))
            for ts in range(0, horizon + 1, spec.period)
        ]
        per_device[device] = samples
    power = DevicePowerTrace(per_device)

    tick_footprint, _ = accounting.gen_footprint_naive(trace, power)
    expected = accounting.aggregate(tick_footprint)
    return trace, power, expected
