"""Convert power sampler logs to the canonical power.csv format.

The input is a CSV with a header row; the device, timestamp and watt
columns are named by the caller (defaults ``device``, ``ts``, ``watts``)
and extra columns are ignored, so typical sampler logs convert without
preprocessing. An optional fraction column carries the attribution share
of each reading and is preserved in the output.

Rows are sorted per device by timestamp; residual duplicate (device, ts)
pairs after sorting are dropped (keeping the first occurrence) and counted,
or rejected outright in strict mode with the offending row number. Device
labels pass through an optional device map, then are lowercased to the
canonical spelling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from .timeline import ConversionError


@dataclass
class PowerLogSummary:
    converted: int = 0
    skipped_invalid: int = 0
    skipped_duplicate: int = 0
    skipped_unmapped_device: int = 0
    unmapped_devices: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"converted {self.converted} sample(s)"]
        for label, count in (
            ("invalid row", self.skipped_invalid),
            ("duplicate (device, ts)", self.skipped_duplicate),
            ("unmapped device", self.skipped_unmapped_device),
        ):
            if count:
                out.append(f"skipped {count} row(s): {label}")
        for device in self.unmapped_devices:
            out.append(f"unmapped device: {device}")
        return out


CANONICAL_KINDS = ("cpu", "gpu", "other")


def _canonical_device(raw: str, device_map: dict[str, str] | None) -> str | None:
    label = (device_map or {}).get(raw, raw).strip().lower()
    kind, sep, index = label.partition(":")
    if sep and kind in CANONICAL_KINDS and index.isdigit():
        return label
    return None


def _int_micros(text: str) -> int | None:
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        return None
    if not value.is_integer():
        return None
    return int(value)


def convert_power_log(
    in_path: str | Path,
    out_path: str | Path,
    device_column: str = "device",
    ts_column: str = "ts",
    watts_column: str = "watts",
    fraction_column: str | None = None,
    device_map: dict[str, str] | None = None,
    strict: bool = False,
) -> PowerLogSummary:
    in_path, out_path = Path(in_path), Path(out_path)
    summary = PowerLogSummary()

    with open(in_path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ConversionError(f"{in_path}:1: missing header row") from None
        columns = {name: pos for pos, name in enumerate(header)}
        wanted = [device_column, ts_column, watts_column]
        if fraction_column:
            wanted.append(fraction_column)
        for name in wanted:
            if name not in columns:
                raise ConversionError(f"{in_path}:1: no column named {name!r}")

        rows = []  # (device, ts, watts, fraction, source line)
        unmapped: dict[str, None] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if max(columns[name] for name in wanted) >= len(row):
                summary.skipped_invalid += 1
                continue
            raw_device = row[columns[device_column]]
            device = _canonical_device(raw_device, device_map)
            if device is None:
                summary.skipped_unmapped_device += 1
                unmapped[raw_device] = None
                continue
            ts = _int_micros(row[columns[ts_column]])
            try:
                watts = float(row[columns[watts_column]])
            except ValueError:
                watts = None
            fraction = 1.0
            if fraction_column:
                try:
                    fraction = float(row[columns[fraction_column]])
                except ValueError:
                    fraction = None
            if (
                ts is None or ts < 0
                or watts is None or not (math.isfinite(watts) and watts >= 0)
                or fraction is None or not 0.0 <= fraction <= 1.0
            ):
                summary.skipped_invalid += 1
                continue
            rows.append((device, ts, watts, fraction, lineno))

    summary.unmapped_devices = list(unmapped)
    if strict and summary.unmapped_devices:
        raise ConversionError("unmapped device(s): " + ", ".join(summary.unmapped_devices))

    rows.sort(key=lambda r: (r[0], r[1], r[4]))
    kept = []
    previous_key = None
    for device, ts, watts, fraction, lineno in rows:
        key = (device, ts)
        if key == previous_key:
            if strict:
                raise ConversionError(
                    f"{in_path}:{lineno}: duplicate timestamp {ts} for device {device}"
                )
            summary.skipped_duplicate += 1
            continue
        previous_key = key
        kept.append((device, ts, watts, fraction))
        summary.converted += 1

    with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        if fraction_column:
            writer.writerow(["device", "ts", "watts", "fraction"])
            for device, ts, watts, fraction in kept:
                writer.writerow([device, str(ts), repr(watts), repr(fraction)])
        else:
            writer.writerow(["device", "ts", "watts"])
            for device, ts, watts, _ in kept:
                writer.writerow([device, str(ts), repr(watts)])
    return summary
