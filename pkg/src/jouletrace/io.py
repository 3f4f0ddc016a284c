"""On-disk formats: canonical traces, footprints, diagrams, matrices.

Formats (all UTF-8, LF line endings, byte-deterministic given equal input):

* ``events.jsonl`` — one object per line, fields exactly
  ``{"ts": int, "dur": int, "device": str, "op": str}``.
* ``power.csv`` — header ``device,ts,watts`` or ``device,ts,watts,fraction``;
  per device, strictly increasing timestamps across the file.
* ``tef.json`` / ``stef.json`` — one object mapping name shorthand to joules.
* ``edd.json`` — recursive ``{name, kind, energy, share, children[]}``
  (plus ``dataflow`` pairs on composites that have any);
  ``edd.dot`` — one digraph, solid containment edges, dashed dataflow edges,
  round-edged composite boxes, sharp tensor boxes.
* ``matrix.csv`` — labels in the first row and column; degenerate cells
  are empty.
* topology sidecar — one ``{"parent", "from", "to"}`` object per line,
  naming dataflow edges among one composite's children.

Readers are strict by default and reject out-of-invariant records with the
file and line number; the opt-in lenient mode skips bad lines and logs how
many were dropped. Reals are rendered with 9 significant digits.
"""

from __future__ import annotations

import csv
import io as _stdio
import json
import logging
import math
from pathlib import Path

from .accounting import TEF
from .footprint import EDDNode, SummarizedPowerFootprint, DataflowEdge
from .model import (
    SUMMARY_SEGMENT,
    DeviceId,
    DevicePowerTrace,
    EventTrace,
    ParseError,
    PowerSample,
    QTN,
    QualifiedTensorName,
    StructuralError,
    TensorEvent,
)
from .similarity import SimilarityMatrix

logger = logging.getLogger(__name__)

EVENT_FIELDS = ("ts", "dur", "device", "op")
POWER_HEADER = ("device", "ts", "watts")
POWER_HEADER_FRACTION = ("device", "ts", "watts", "fraction")


def fmt_real(value: float) -> str:
    """Canonical 9-significant-digit rendering used by every writer."""
    return format(value, ".9g")


def _require_int(record: dict, key: str) -> int:
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"field {key!r} must be an integer, got {value!r}")
    return value


def _parse_op(shorthand, reject_summary: bool) -> QTN:
    if not isinstance(shorthand, str):
        raise ParseError(f"field 'op' must be a string, got {shorthand!r}")
    op = QualifiedTensorName.parse(shorthand)
    if reject_summary and SUMMARY_SEGMENT in op.segments:
        raise ParseError(
            f"reserved segment {SUMMARY_SEGMENT!r} is not allowed in raw traces: {shorthand!r}"
        )
    return op


def _parse_event_line(text: str) -> TensorEvent:
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(record, dict):
        raise ParseError(f"expected an object, got {type(record).__name__}")
    for key in record:
        if key not in EVENT_FIELDS:
            raise ParseError(f"unexpected field {key!r}")
    for key in EVENT_FIELDS:
        if key not in record:
            raise ParseError(f"missing field {key!r}")
    ts = _require_int(record, "ts")
    dur = _require_int(record, "dur")
    if ts < 0:
        raise ParseError(f"field 'ts' must be non-negative, got {ts}")
    if dur < 1:
        raise ParseError(f"field 'dur' must be >= 1, got {dur}")
    if not isinstance(record["device"], str):
        raise ParseError(f"field 'device' must be a string, got {record['device']!r}")
    device = DeviceId.parse(record["device"])
    op = _parse_op(record["op"], reject_summary=True)
    return TensorEvent(ts, dur, device, op)


def read_events(path: str | Path, lenient: bool = False) -> EventTrace:
    """Read a canonical event trace, preserving file order."""
    path = Path(path)
    events = []
    skipped = 0
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            text = line.rstrip("\n")
            try:
                if not text.strip():
                    raise ParseError("blank line")
                events.append(_parse_event_line(text))
            except ParseError as exc:
                if not lenient:
                    raise ParseError(f"{path}:{lineno}: {exc}") from None
                skipped += 1
    if skipped:
        logger.warning("%s: skipped %d malformed event line(s)", path, skipped)
    return EventTrace(events)


def write_events(trace: EventTrace, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(render_events(trace))


def render_events(trace: EventTrace) -> str:
    lines = []
    for event in trace:
        if SUMMARY_SEGMENT in event.op.segments:
            raise StructuralError(
                f"reserved segment {SUMMARY_SEGMENT!r} is not allowed "
                f"in raw traces: {event.op.shorthand!r}"
            )
        lines.append(
            '{"ts": %d, "dur": %d, "device": %s, "op": %s}'
            % (event.ts, event.dur, json.dumps(event.device.label), json.dumps(event.op.shorthand))
        )
    return "".join(line + "\n" for line in lines)


def _parse_power_row(row: list[str], has_fraction: bool) -> tuple[DeviceId, PowerSample]:
    expected = 4 if has_fraction else 3
    if len(row) != expected:
        raise ParseError(f"expected {expected} columns, got {len(row)}")
    device = DeviceId.parse(row[0])
    if not row[1].strip().lstrip("-").isdigit():
        raise ParseError(f"column 'ts' must be an integer, got {row[1]!r}")
    ts = int(row[1])
    if ts < 0:
        raise ParseError(f"column 'ts' must be non-negative, got {ts}")
    try:
        watts = float(row[2])
    except ValueError:
        raise ParseError(f"column 'watts' must be a number, got {row[2]!r}") from None
    fraction = 1.0
    if has_fraction:
        try:
            fraction = float(row[3])
        except ValueError:
            raise ParseError(f"column 'fraction' must be a number, got {row[3]!r}") from None
    try:
        return device, PowerSample(ts, watts, fraction)
    except StructuralError as exc:
        raise ParseError(str(exc)) from None


def read_power(path: str | Path, lenient: bool = False) -> DevicePowerTrace:
    """Read a canonical power trace; timestamps must ascend per device."""
    path = Path(path)
    per_device: dict[DeviceId, list[PowerSample]] = {}
    last_ts: dict[DeviceId, int] = {}
    skipped = 0
    with open(path, encoding="utf-8", newline="") as handle:
        rows = csv.reader(handle)
        try:
            header = tuple(next(rows))
        except StopIteration:
            raise ParseError(f"{path}:1: missing header row") from None
        if header not in (POWER_HEADER, POWER_HEADER_FRACTION):
            raise ParseError(
                f"{path}:1: header must be 'device,ts,watts' or "
                f"'device,ts,watts,fraction', got {','.join(header)!r}"
            )
        has_fraction = header == POWER_HEADER_FRACTION
        for lineno, row in enumerate(rows, start=2):
            try:
                if not row:
                    raise ParseError("blank line")
                device, sample = _parse_power_row(row, has_fraction)
                if device in last_ts and sample.ts <= last_ts[device]:
                    kind = "duplicate" if sample.ts == last_ts[device] else "non-increasing"
                    raise ParseError(
                        f"{kind} timestamp {sample.ts} for device {device}"
                    )
            except ParseError as exc:
                if not lenient:
                    raise ParseError(f"{path}:{lineno}: {exc}") from None
                skipped += 1
                continue
            last_ts[device] = sample.ts
            per_device.setdefault(device, []).append(sample)
    if skipped:
        logger.warning("%s: skipped %d malformed power row(s)", path, skipped)
    return DevicePowerTrace(per_device)


def write_power(power: DevicePowerTrace, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(render_power(power))


def render_power(power: DevicePowerTrace) -> str:
    with_fraction = any(
        sample.fraction != 1.0 for device in power.devices() for sample in power[device]
    )
    out = _stdio.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(POWER_HEADER_FRACTION if with_fraction else POWER_HEADER)
    for device in power.devices():
        for sample in power[device]:
            row = [device.label, str(sample.ts), fmt_real(sample.watts)]
            if with_fraction:
                row.append(fmt_real(sample.fraction))
            writer.writerow(row)
    return out.getvalue()


def read_footprint(path: str | Path) -> TEF:
    """Read a tef.json/stef.json object (summary segments are legal here)."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise ParseError(f"{path}: footprint must be a JSON object")
    footprint: TEF = {}
    for shorthand, value in payload.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{path}: value for {shorthand!r} must be a number")
        if not (math.isfinite(value) and value >= 0):
            raise ParseError(
                f"{path}: value for {shorthand!r} must be finite and non-negative"
            )
        try:
            op = QualifiedTensorName.parse(shorthand)
        except ParseError as exc:
            raise ParseError(f"{path}: bad tensor name {shorthand!r}: {exc}") from None
        if op in footprint:
            raise ParseError(f"{path}: duplicate tensor name {shorthand!r}")
        footprint[op] = float(value)
    return footprint


def render_footprint_json(footprint: TEF) -> str:
    entries = [
        f"  {json.dumps(op.shorthand)}: {fmt_real(joules)}"
        for op, joules in sorted(footprint.items())
    ]
    if not entries:
        return "{}\n"
    return "{\n" + ",\n".join(entries) + "\n}\n"


def write_tef(footprint: TEF, path: str | Path, fmt: str = "json") -> None:
    if fmt != "json":
        raise StructuralError(f"unsupported footprint format {fmt!r} (expected 'json')")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(render_footprint_json(footprint))


write_stef = write_tef


def render_stpf_json(stpf: SummarizedPowerFootprint) -> str:
    """STPF serialized as a plain name-to-watts footprint object."""
    return render_footprint_json(stpf.watts)


def render_edd_json(root: EDDNode) -> str:
    def emit(node: EDDNode, indent: int) -> list[str]:
        pad = " " * indent
        inner = " " * (indent + 2)
        lines = [pad + "{"]
        body = [
            f"{inner}\"name\": {json.dumps(node.name)}",
            f"{inner}\"kind\": {json.dumps(node.kind)}",
            f"{inner}\"energy\": {fmt_real(node.energy)}",
            f"{inner}\"share\": {fmt_real(node.share)}",
        ]
        if node.dataflow:
            rendered = ", ".join(
                "{" + f"\"from\": {json.dumps(a)}, \"to\": {json.dumps(b)}" + "}"
                for a, b in node.dataflow
            )
            body.append(f"{inner}\"dataflow\": [{rendered}]")
        if node.children:
            child_blocks = [emit(child, indent + 4) for child in node.children]
            joined = ",\n".join("\n".join(block) for block in child_blocks)
            body.append(f"{inner}\"children\": [\n{joined}\n{inner}]")
        else:
            body.append(f"{inner}\"children\": []")
        lines.append(",\n".join(body))
        lines.append(pad + "}")
        return lines

    return "\n".join(emit(root, 0)) + "\n"


def render_edd_dot(root: EDDNode) -> str:
    lines = [
        "digraph energy_distribution {",
        "  rankdir=TB;",
        '  node [fontname="Helvetica"];',
    ]
    nodes = root.walk()
    ids = {id(node): "/".join(path) for path, node in nodes}
    for path, node in nodes:
        label = f"{node.name}\\n{fmt_real(node.energy)} J\\n{fmt_real(node.share * 100)}%"
        shape = "style=rounded, shape=box" if node.kind == "composite" else "shape=box"
        lines.append(f'  {json.dumps(ids[id(node)])} [label="{label}", {shape}];')
    for path, node in nodes:
        for child in node.children:
            lines.append(f"  {json.dumps(ids[id(node)])} -> {json.dumps(ids[id(child)])};")
    for path, node in nodes:
        parent_id = ids[id(node)]
        for src, dst in node.dataflow:
            lines.append(
                f'  {json.dumps(parent_id + "/" + src)} -> '
                f'{json.dumps(parent_id + "/" + dst)} [style=dashed];'
            )
    lines.append("}")
    return "".join(line + "\n" for line in lines)


def write_edd(root: EDDNode, path: str | Path, fmt: str = "json") -> None:
    if fmt == "json":
        content = render_edd_json(root)
    elif fmt == "dot":
        content = render_edd_dot(root)
    else:
        raise StructuralError(f"unsupported diagram format {fmt!r} (expected 'json' or 'dot')")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(content)


def render_matrix_csv(matrix: SimilarityMatrix) -> str:
    out = _stdio.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["", *matrix.labels])
    for label, row in zip(matrix.labels, matrix.cells):
        writer.writerow(
            [label, *["" if cell.degenerate else fmt_real(cell.value) for cell in row]]
        )
    return out.getvalue()


def write_matrix(matrix: SimilarityMatrix, path: str | Path, fmt: str = "csv") -> None:
    if fmt != "csv":
        raise StructuralError(f"unsupported matrix format {fmt!r} (expected 'csv')")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(render_matrix_csv(matrix))


def render_curve_csv(x_name: str, points: list) -> str:
    """CSV for precision curves: one (x, value) row per point."""
    out = _stdio.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([x_name, "pcc"])
    for x, result in points:
        writer.writerow([str(x), "" if result.degenerate else fmt_real(result.value)])
    return out.getvalue()


def read_topology(path: str | Path) -> list[DataflowEdge]:
    """Read dataflow sidecar edges: {"parent", "from", "to"} per line."""
    path = Path(path)
    edges: list[DataflowEdge] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from None
            if not isinstance(record, dict) or set(record) != {"parent", "from", "to"}:
                raise ParseError(
                    f"{path}:{lineno}: expected fields parent, from, to"
                )
            if not all(isinstance(record[k], str) for k in ("parent", "from", "to")):
                raise ParseError(f"{path}:{lineno}: all fields must be strings")
            edges.append((record["parent"], record["from"], record["to"]))
    return edges
