"""Whole-trace analysis: drive a pipeline from a broker, produce a report.

A report captures everything needed to compare two runs later: the model
name, where the trace came from and a digest of its content, the summary
statistics, allocator behavior, and optional per-region accounting.
Reports serialize to JSON so a later diff never needs the trace again.

Region filtering works on instruction addresses.  Instructions outside
every region range are dropped before they reach the pipeline; each
maximal run of in-region instructions is one visit.  Leaving the region
drains the pipeline, so visits are timed independently, and the visit
number becomes the timeline iteration tag.
"""

from __future__ import annotations

import hashlib
import json
from bisect import bisect_right
from dataclasses import dataclass

from .engine import Pipeline, PoolStats
from .errors import TraceParseError, TruncatedTraceError
from .lsunit import AliasPolicy
from .model import MachineModel
from .trace import render_instruction
from .views import SummaryStats, TimelineRecorder, summarize


@dataclass(frozen=True)
class RegionSpec:
    """Address ranges of interest, half-open, merged when overlapping."""

    entries: tuple[tuple[int, int, str | None], ...]
    ranges: tuple[tuple[int, int], ...]
    _starts: tuple[int, ...]

    @classmethod
    def from_ranges(
        cls, entries: list[tuple[int, int, str | None]]
    ) -> "RegionSpec":
        for start, end, _ in entries:
            if start < 0 or end <= start:
                raise TraceParseError(
                    f"bad region range {start:#x}..{end:#x}"
                )
        merged: list[list[int]] = []
        for start, end, _ in sorted(entries):
            if merged and start < merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], end)
            else:
                merged.append([start, end])
        ranges = tuple((s, e) for s, e in merged)
        return cls(
            entries=tuple(entries),
            ranges=ranges,
            _starts=tuple(s for s, _ in ranges),
        )

    def contains(self, address: int) -> bool:
        idx = bisect_right(self._starts, address) - 1
        return idx >= 0 and address < self.ranges[idx][1]


def parse_regions(text: str) -> RegionSpec:
    """Parse a region file: 'R <start> <end>' or 'S <symbol> <start> <end>'."""
    entries: list[tuple[int, int, str | None]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        fields = body.split()
        try:
            if fields[0] == "R" and len(fields) == 3:
                entries.append((int(fields[1], 0), int(fields[2], 0), None))
                continue
            if fields[0] == "S" and len(fields) == 4:
                entries.append(
                    (int(fields[2], 0), int(fields[3], 0), fields[1])
                )
                continue
        except ValueError:
            raise TraceParseError(
                f"bad address in region line: '{body}'", lineno
            ) from None
        raise TraceParseError(f"bad region line: '{body}'", lineno)
    if not entries:
        raise TraceParseError("region file declares no ranges")
    return RegionSpec.from_ranges(entries)


@dataclass(frozen=True)
class RegionStats:
    visits: int
    instructions: int
    cycles: int
    per_visit: tuple[tuple[int, int], ...]  # (instructions, cycles)


@dataclass(frozen=True)
class AnalysisReport:
    model_name: str
    source: str
    digest: str
    alias_policy: str
    truncated: bool
    summary: SummaryStats
    pool: PoolStats
    missing_metadata: int
    regions: RegionStats | None

    def to_json(self) -> str:
        doc = {
            "report_version": 1,
            "model": self.model_name,
            "source": self.source,
            "digest": self.digest,
            "alias_policy": self.alias_policy,
            "truncated": self.truncated,
            "summary": {
                "instructions": self.summary.instructions,
                "total_cycles": self.summary.total_cycles,
                "total_uops": self.summary.total_uops,
                "dispatch_width": self.summary.dispatch_width,
                "uops_per_cycle": self.summary.uops_per_cycle,
                "ipc": self.summary.ipc,
                "block_rthroughput": self.summary.block_rthroughput,
            },
            "pool": {
                "total_allocated": self.pool.total_allocated,
                "total_recycled": self.pool.total_recycled,
                "peak_live": self.pool.peak_live,
            },
            "missing_metadata": self.missing_metadata,
            "regions": None if self.regions is None else {
                "visits": self.regions.visits,
                "instructions": self.regions.instructions,
                "cycles": self.regions.cycles,
                "per_visit": [
                    {"instructions": n, "cycles": c}
                    for n, c in self.regions.per_visit
                ],
            },
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AnalysisReport":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise TraceParseError(f"report is not valid JSON: {e.msg}") from None
        if not isinstance(doc, dict) or doc.get("report_version") != 1:
            raise TraceParseError("not an analysis report (missing version)")
        try:
            summary = SummaryStats(**doc["summary"])
            pool = PoolStats(**doc["pool"])
            raw_regions = doc["regions"]
            regions = None if raw_regions is None else RegionStats(
                visits=raw_regions["visits"],
                instructions=raw_regions["instructions"],
                cycles=raw_regions["cycles"],
                per_visit=tuple(
                    (v["instructions"], v["cycles"])
                    for v in raw_regions["per_visit"]
                ),
            )
            return cls(
                model_name=doc["model"],
                source=doc["source"],
                digest=doc["digest"],
                alias_policy=doc["alias_policy"],
                truncated=doc["truncated"],
                summary=summary,
                pool=pool,
                missing_metadata=doc["missing_metadata"],
                regions=regions,
            )
        except (KeyError, TypeError) as e:
            raise TraceParseError(f"malformed analysis report: {e}") from None


class _HashingBroker:
    """Passes batches through while hashing the canonical trace text."""

    def __init__(self, inner):
        self.inner = inner
        self._sha = hashlib.sha256()

    def fetch_batch(self, max_n: int):
        batch = self.inner.fetch_batch(max_n)
        for inst in batch.instructions:
            self._sha.update(render_instruction(inst).encode("utf-8"))
            self._sha.update(b"\n")
        return batch

    def hexdigest(self) -> str:
        return self._sha.hexdigest()


def analyze(
    model: MachineModel,
    broker,
    *,
    source: str = "",
    alias_policy: AliasPolicy = AliasPolicy.METADATA,
    regions: RegionSpec | None = None,
    recorder: TimelineRecorder | None = None,
    batch_size: int | None = None,
    entry_capacity: int = 256,
) -> AnalysisReport:
    """Run a full analysis over a broker's stream and build the report."""
    hashing = _HashingBroker(broker)
    pipe = Pipeline(model, alias_policy, entry_capacity)
    if recorder is not None:
        recorder.attach(pipe)

    if regions is None:
        truncated = False
        while True:
            outcome = pipe.run_until_starved(hashing, batch_size)
            if outcome.finished:
                truncated = outcome.truncated
                break
            # Suspended on a quiet producer: poll until the stream ends.
        region_stats = None
    else:
        truncated, region_stats = _analyze_regions(
            pipe, hashing, regions, batch_size or entry_capacity
        )

    return AnalysisReport(
        model_name=model.name,
        source=source,
        digest=hashing.hexdigest(),
        alias_policy=alias_policy.value,
        truncated=truncated,
        summary=summarize(pipe),
        pool=pipe.pool_stats(),
        missing_metadata=pipe.missing_metadata,
        regions=region_stats,
    )


def _feed_one(pipe: Pipeline, inst):
    while pipe.feed((inst,)) == 0:
        pipe.run_cycle()


def _analyze_regions(pipe, broker, regions, batch_size):
    in_region = False
    visit = -1
    visit_instructions = 0
    analyzed = 0
    cycles_base = 0
    per_visit: list[tuple[int, int]] = []
    truncated = False

    eos = False
    while not eos:
        try:
            batch = broker.fetch_batch(batch_size)
        except TruncatedTraceError:
            truncated = True
            break
        for inst in batch.instructions:
            if regions.contains(inst.address):
                if not in_region:
                    in_region = True
                    visit += 1
                    pipe.iteration = visit
                    visit_instructions = 0
                    cycles_base = pipe.total_cycles
                _feed_one(pipe, inst)
                visit_instructions += 1
                analyzed += 1
            elif in_region:
                pipe.drain()
                per_visit.append(
                    (visit_instructions, pipe.total_cycles - cycles_base)
                )
                in_region = False
        if batch.end_of_stream:
            eos = True
        elif batch.stalled and pipe.has_work():
            pipe.run_cycle()

    pipe.drain()
    if in_region:
        per_visit.append((visit_instructions, pipe.total_cycles - cycles_base))
    stats = RegionStats(
        visits=visit + 1,
        instructions=analyzed,
        cycles=sum(c for _, c in per_visit),
        per_visit=tuple(per_visit),
    )
    return truncated, stats
