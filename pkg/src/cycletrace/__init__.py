"""cycletrace: streaming out-of-order pipeline analysis for instruction traces.

Feed an instruction trace (from a file, a socket, or the bundled toy
executor) through a configurable superscalar pipeline model, get cycle
counts, summaries, timelines, and differential comparisons between runs.
"""

from .analysis import (
    AnalysisReport,
    RegionSpec,
    RegionStats,
    analyze,
    parse_regions,
)
from .brokers import (
    FileBroker,
    SequenceBroker,
    SocketBroker,
    send_trace,
    stream_to_socket,
)
from .diff import (
    DiffReport,
    diff_reports,
    differential_throughput,
    geometric_mean,
    measured_delta_from_pairs,
    parse_ground_truth,
    prediction_error,
    render_diff,
)
from .engine import (
    InstrRecord,
    InstrState,
    MetadataRegistry,
    Pipeline,
    PoolStats,
    RecyclePool,
    RunOutcome,
)
from .errors import (
    AnalysisError,
    CycleTraceError,
    ModelError,
    ProtocolError,
    TraceParseError,
    TruncatedTraceError,
    UndefinedRatioError,
)
from .lsunit import AliasPolicy, MemQueues, ranges_overlap
from .model import (
    InstrClass,
    MachineModel,
    ResourceDesc,
    effective_latency,
    load_model,
    render_model,
    validate_model,
)
from .toyisa import ProgramError, ToyOp, ToyProgram, execute, parse_program
from .trace import (
    AccessKind,
    Batch,
    MemoryAccess,
    TraceInstruction,
    from_wire,
    iter_trace_text,
    parse_trace,
    parse_trace_line,
    render_instruction,
    render_trace,
    to_wire,
)
from .views import (
    SummaryStats,
    TimelineRecorder,
    TimelineRow,
    export_browser_trace,
    render_summary,
    render_timeline,
    render_trace_events,
    summarize,
    timeline_trace_events,
)

__version__ = "0.1.0"

__all__ = [
    "AccessKind",
    "AliasPolicy",
    "AnalysisError",
    "AnalysisReport",
    "Batch",
    "CycleTraceError",
    "DiffReport",
    "FileBroker",
    "InstrClass",
    "InstrRecord",
    "InstrState",
    "MachineModel",
    "MemQueues",
    "MemoryAccess",
    "MetadataRegistry",
    "ModelError",
    "Pipeline",
    "PoolStats",
    "ProgramError",
    "ProtocolError",
    "RecyclePool",
    "RegionSpec",
    "RegionStats",
    "ResourceDesc",
    "RunOutcome",
    "SequenceBroker",
    "SocketBroker",
    "SummaryStats",
    "TimelineRecorder",
    "TimelineRow",
    "ToyOp",
    "ToyProgram",
    "TraceInstruction",
    "TraceParseError",
    "TruncatedTraceError",
    "UndefinedRatioError",
    "analyze",
    "diff_reports",
    "differential_throughput",
    "effective_latency",
    "execute",
    "export_browser_trace",
    "from_wire",
    "geometric_mean",
    "iter_trace_text",
    "load_model",
    "measured_delta_from_pairs",
    "parse_ground_truth",
    "parse_program",
    "parse_regions",
    "parse_trace",
    "parse_trace_line",
    "prediction_error",
    "render_diff",
    "render_instruction",
    "render_model",
    "render_summary",
    "render_timeline",
    "render_trace",
    "render_trace_events",
    "send_trace",
    "stream_to_socket",
    "summarize",
    "timeline_trace_events",
    "to_wire",
    "validate_model",
]
