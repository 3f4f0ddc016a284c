"""Tensor-aware energy accounting for deep-learning traces.

Aligns durable tensor events with per-device power samples, attributes
energy to qualified tensor names, and builds hierarchical energy
distribution diagrams, summarized footprints and cross-run similarity
metrics on top.
"""

from .accounting import (
    AccountingDiagnostics,
    aggregate,
    build_tick_footprint,
    flatten,
    gen_footprint_naive,
    gen_footprint_optimized,
    now,
    split_passes,
)
from .footprint import (
    EDDNode,
    SummarizedPowerFootprint,
    compute_stpf,
    summarize,
    to_edd,
    top_k,
)
from .model import (
    DeviceId,
    DeviceKind,
    DevicePowerTrace,
    EventTrace,
    ParseError,
    PowerSample,
    QualifiedTensorName,
    StructuralError,
    TensorEvent,
    parse_qtn,
    render_qtn,
)
from .similarity import (
    ComparisonResult,
    Metric,
    SimilarityMatrix,
    assw,
    asss,
    combine_mean,
    comparison_matrix,
    med,
    pcc,
    stability_matrix,
)
from .synth import PowerModel, SynthSpec, generate

__version__ = "0.1.0"
