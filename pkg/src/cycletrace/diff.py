"""Differential throughput: compare two analysis runs of related traces.

The quantity of interest is the ratio of candidate cycles to baseline
cycles.  A ratio above 1.0 means the candidate is predicted slower.
When measured cycle counts are available the prediction error is the
absolute difference between the measured ratio and the predicted one,
and a set of such errors aggregates by geometric mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .analysis import AnalysisReport
from .errors import AnalysisError, TraceParseError, UndefinedRatioError


def differential_throughput(base_cycles: float, candidate_cycles: float) -> float:
    """Ratio of candidate to baseline cycles.  Both counts must be positive."""
    if base_cycles <= 0:
        raise UndefinedRatioError(
            f"baseline cycle count must be positive, got {base_cycles}"
        )
    if candidate_cycles <= 0:
        raise UndefinedRatioError(
            f"candidate cycle count must be positive, got {candidate_cycles}"
        )
    return candidate_cycles / base_cycles


def prediction_error(predicted_delta: float, measured_delta: float) -> float:
    return abs(measured_delta - predicted_delta)


def geometric_mean(values) -> float:
    vals = list(values)
    if not vals:
        raise AnalysisError("geometric mean of an empty sequence")
    total = 0.0
    for v in vals:
        if v < 0:
            raise AnalysisError(f"geometric mean of a negative value {v}")
        if v == 0:
            return 0.0
        total += math.log(v)
    return math.exp(total / len(vals))


@dataclass(frozen=True)
class DiffReport:
    model_name: str
    base_source: str
    cand_source: str
    base_cycles: int
    cand_cycles: int
    delta: float
    measured_delta: float | None = None
    error: float | None = None


def diff_reports(
    base: AnalysisReport,
    candidate: AnalysisReport,
    measured_delta: float | None = None,
) -> DiffReport:
    if base.model_name != candidate.model_name:
        raise AnalysisError(
            "cannot compare runs from different models: "
            f"'{base.model_name}' vs '{candidate.model_name}'"
        )
    delta = differential_throughput(
        base.summary.total_cycles, candidate.summary.total_cycles
    )
    error = None
    if measured_delta is not None:
        error = prediction_error(delta, measured_delta)
    return DiffReport(
        model_name=base.model_name,
        base_source=base.source,
        cand_source=candidate.source,
        base_cycles=base.summary.total_cycles,
        cand_cycles=candidate.summary.total_cycles,
        delta=delta,
        measured_delta=measured_delta,
        error=error,
    )


def parse_ground_truth(text: str) -> list[tuple[float, float]]:
    """Parse measured cycle pairs, one 'G <base> <candidate>' per line."""
    pairs: list[tuple[float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        fields = body.split()
        if len(fields) != 3 or fields[0] != "G":
            raise TraceParseError(f"bad ground-truth line: '{body}'", lineno)
        try:
            pairs.append((float(fields[1]), float(fields[2])))
        except ValueError:
            raise TraceParseError(
                f"bad cycle count in ground-truth line: '{body}'", lineno
            ) from None
    if not pairs:
        raise TraceParseError("ground-truth file has no measurements")
    return pairs


def measured_delta_from_pairs(pairs) -> float:
    """Aggregate measured pairs into one ratio (geomean of per-pair ratios)."""
    return geometric_mean(
        differential_throughput(b, c) for b, c in pairs
    )


def render_diff(report: DiffReport) -> str:
    lines = []

    def put(label: str, value) -> None:
        lines.append(f"{label + ':':<18} {value}")

    put("Model", report.model_name)
    put("Baseline", f"{report.base_source or '-'} ({report.base_cycles} cycles)")
    put("Candidate", f"{report.cand_source or '-'} ({report.cand_cycles} cycles)")
    put("Delta", f"{report.delta:.4f}")
    if report.measured_delta is not None:
        put("Measured Delta", f"{report.measured_delta:.4f}")
        put("Prediction Error", f"{report.error:.4f}")
    return "\n".join(lines) + "\n"
