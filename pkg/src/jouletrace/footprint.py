"""Footprint algebra above raw tensor energy footprints.

* ``summarize`` collapses self-similar transformer layers (path segments
  matching ``layer_<digits>`` by default) into the reserved ``transformer``
  segment, summing colliding keys; total energy is preserved exactly.
* ``to_edd`` rebuilds the nested energy distribution diagram: a tree whose
  leaves hold tensor energies and whose composite nodes sum their children,
  with sibling shares normalized per enclosing diagram.
* ``compute_stpf`` reports time-weighted mean power per summarized name
  (attributed energy divided by attributed active time).
* ``top_k`` ranks footprint entries, with cross-run dispersion when several
  runs are supplied.
"""

from __future__ import annotations

import math
import re
import statistics
from dataclasses import dataclass, field

from . import accounting
from .accounting import TEF
from .model import (
    SUMMARY_SEGMENT,
    DevicePowerTrace,
    EventTrace,
    QTN,
    QualifiedTensorName,
    StructuralError,
)

# A transformer-layer boundary segment: "layer_" plus digits, as a whole
# segment. Configurable for model families with other naming schemes.
DEFAULT_LAYER_PATTERN = r"layer_\d+"


def summarize(tef: TEF, pattern: str = DEFAULT_LAYER_PATTERN) -> TEF:
    """Rewrite matching path segments to the reserved summary token.

    Keys that collide after rewriting have their energies summed. The
    terminal tensor name is never rewritten. Idempotent, and preserves
    total energy by construction.
    """
    matcher = re.compile(pattern)
    summarized: TEF = {}
    for op, joules in tef.items():
        new_path = tuple(
            SUMMARY_SEGMENT if matcher.fullmatch(segment) else segment
            for segment in op.path
        )
        key = QualifiedTensorName(new_path, op.tensor) if new_path != op.path else op
        summarized[key] = summarized.get(key, 0.0) + joules
    return summarized


@dataclass
class EDDNode:
    """One box of an energy distribution diagram.

    ``share`` is normalized among siblings (per enclosing diagram); the
    root's share is 1 when it carries any energy. ``dataflow`` lists
    directed edges among this node's children, by child name.
    """

    name: str
    kind: str  # "composite" | "tensor"
    energy: float = 0.0
    share: float = 0.0
    children: list["EDDNode"] = field(default_factory=list)
    dataflow: list[tuple[str, str]] = field(default_factory=list)

    def child(self, name: str) -> "EDDNode | None":
        for node in self.children:
            if node.name == name:
                return node
        return None

    def walk(self, prefix: tuple[str, ...] = ()) -> list[tuple[tuple[str, ...], "EDDNode"]]:
        """Pre-order traversal as (path, node) pairs; path includes the node."""
        here = (*prefix, self.name)
        out = [(here, self)]
        for node in self.children:
            out.extend(node.walk(here))
        return out


# Synthetic root name used when a footprint has several top-level layers.
VIRTUAL_ROOT = "*"

DataflowEdge = tuple[str, str, str]  # (parent path, from child, to child)


def to_edd(tef: TEF, topology: list[DataflowEdge] | None = None) -> EDDNode:
    """Rebuild the hierarchical energy diagram from a footprint.

    Composite nodes are created for every path segment, leaves for tensor
    names. A name may not be both a leaf and a composite; that raises a
    structural error naming the offending path.
    """
    root = EDDNode(VIRTUAL_ROOT, "composite")
    leaves: set[tuple[str, ...]] = set()
    for op in sorted(tef):
        node = root
        walked: list[str] = []
        for segment in op.path:
            walked.append(segment)
            child = node.child(segment)
            if child is None:
                child = EDDNode(segment, "composite")
                node.children.append(child)
            elif child.kind == "tensor":
                raise StructuralError(
                    f"{'/'.join(walked)} is both a tensor and a composite layer"
                )
            node = child
        if node.child(op.tensor) is not None:
            raise StructuralError(
                f"{op.shorthand} is both a tensor and a composite layer"
            )
        node.children.append(EDDNode(op.tensor, "tensor", energy=tef[op]))
        leaves.add(op.segments)

    def fill(node: EDDNode) -> float:
        if node.kind == "composite":
            node.children.sort(key=lambda child: child.name)
            node.energy = math.fsum(fill(child) for child in node.children)
        return node.energy

    def normalize(node: EDDNode) -> None:
        for child in node.children:
            child.share = child.energy / node.energy if node.energy > 0 else 0.0
            normalize(child)

    fill(root)
    if len(root.children) == 1:
        root = root.children[0]
    root.share = 1.0 if root.energy > 0 else 0.0
    normalize(root)

    if topology:
        _attach_dataflow(root, topology)
    return root


def _attach_dataflow(root: EDDNode, topology: list[DataflowEdge]) -> None:
    by_path = {path: node for path, node in root.walk()}
    for parent_path, src, dst in topology:
        parent = by_path.get(tuple(parent_path.split("/")) if parent_path else (root.name,))
        if parent is None or parent.kind != "composite":
            continue
        if parent.child(src) is None or parent.child(dst) is None:
            continue
        parent.dataflow.append((src, dst))
    for _, node in root.walk():
        node.dataflow.sort()


@dataclass(frozen=True)
class SummarizedPowerFootprint:
    """Per summarized name: mean power while active, and the active time.

    For every key, ``watts[k] * active_seconds[k]`` equals the summarized
    energy footprint entry. Active time counts one full tick per occurrence,
    so two concurrent occurrences of one name accrue time twice.
    """

    watts: dict[QTN, float]
    active_seconds: dict[QTN, float]


def compute_stpf(
    trace: EventTrace,
    power: DevicePowerTrace,
    pattern: str = DEFAULT_LAYER_PATTERN,
    tick_seconds: float = accounting.DEFAULT_TICK_SECONDS,
) -> SummarizedPowerFootprint:
    """Summarized tensor power footprint: energy over active time per key.

    Keys with zero active time (nothing attributed on any power-covered
    device) are omitted.
    """
    tef, _ = accounting.gen_footprint_optimized(trace, power, tick_seconds)
    seconds = accounting.active_time(trace, power, tick_seconds)
    stef = summarize(tef, pattern)
    s_seconds = summarize(seconds, pattern)
    watts = {
        op: stef.get(op, 0.0) / active
        for op, active in s_seconds.items()
        if active > 0
    }
    return SummarizedPowerFootprint(watts, {op: s_seconds[op] for op in watts})


def top_k(
    footprint: TEF | SummarizedPowerFootprint | list,
    k: int,
) -> list[tuple[QTN, float, float]]:
    """Top-k entries by value, descending, ties broken by name.

    A list of footprints is treated as repeated runs: the value is the
    per-key mean over runs (missing keys count 0) and the dispersion is the
    sample standard deviation; a single footprint reports dispersion 0.
    """
    if k < 1:
        raise StructuralError(f"k must be >= 1, got {k}")
    runs = footprint if isinstance(footprint, list) else [footprint]
    maps = [run.watts if isinstance(run, SummarizedPowerFootprint) else run for run in runs]
    keys = sorted({op for m in maps for op in m})
    rows = []
    for op in keys:
        values = [m.get(op, 0.0) for m in maps]
        value = math.fsum(values) / len(values)
        spread = statistics.stdev(values) if len(values) > 1 else 0.0
        rows.append((op, value, spread))
    rows.sort(key=lambda row: (-row[1], row[0].shorthand))
    return rows[:k]
