"""Out-of-order pipeline core.

Each simulated cycle applies stages to the machine state in a fixed
order, so every timestamp is a deterministic function of the instruction
stream and the model:

  1. retire   up to retire_width executed records from the ROB head;
  2. complete executions whose latency elapses this cycle;
  3. issue    ready records oldest-first, subject to resource units and
              load-store admission; operands forward the same cycle they
              complete, so a consumer can issue in the cycle its last
              producer finishes;
  4. dispatch up to dispatch_width uops from the entry buffer into the
              ROB, registering scoreboard writes and queue slots.

An instruction never issues earlier than the cycle after its dispatch.
Records live in a recycle pool: the pipeline allocates a new record only
when the free list is empty, so memory stays bounded by the ROB plus the
entry buffer no matter how long the stream runs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from heapq import heappush, heappop
from typing import Callable

from .errors import AnalysisError, TruncatedTraceError
from .lsunit import AliasPolicy, MemQueues
from .model import InstrClass, MachineModel, effective_latency
from .trace import AccessKind


class InstrState(IntEnum):
    DISPATCHED = 0   # in the ROB, operands not ready
    READY = 1        # operands ready, waiting on resources or admission
    EXECUTING = 2
    EXECUTED = 3
    RETIRED = 4


_DISPATCHED = int(InstrState.DISPATCHED)
_READY = int(InstrState.READY)
_EXECUTING = int(InstrState.EXECUTING)
_EXECUTED = int(InstrState.EXECUTED)
_RETIRED = int(InstrState.RETIRED)


@dataclass(slots=True)
class InstrRecord:
    """Mutable per-instruction pipeline state; pooled and recycled."""

    seq_id: int = -1
    cls: InstrClass | None = None
    state: int = _DISPATCHED
    dispatched_at: int = -1
    issued_at: int = -1
    executed_at: int = -1
    retired_at: int = -1
    remaining_latency: int = 0
    effective_latency: int = 1
    uops: int = 1
    reads: tuple[int, ...] = ()
    writes: tuple[int, ...] = ()
    waiting_on: set[int] = field(default_factory=set)
    claims: tuple = ()          # (resource name, busy list, occupancy cycles)
    loads: tuple = ()           # MemoryAccess or None (metadata missing)
    stores: tuple = ()
    address: int = 0


@dataclass(frozen=True)
class PoolStats:
    total_allocated: int
    total_recycled: int
    peak_live: int


class RecyclePool:
    """Free list of InstrRecords with allocation counters."""

    def __init__(self):
        self._free: list[InstrRecord] = []
        self._live = 0
        self.total_allocated = 0
        self.total_recycled = 0
        self.peak_live = 0

    def acquire(self) -> InstrRecord:
        if self._free:
            rec = self._free.pop()
        else:
            rec = InstrRecord()
            self.total_allocated += 1
        self._live += 1
        if self._live > self.peak_live:
            self.peak_live = self._live
        return rec

    def release(self, rec: InstrRecord):
        rec.waiting_on.clear()
        self._free.append(rec)
        self.total_recycled += 1
        self._live -= 1

    def stats(self) -> PoolStats:
        return PoolStats(self.total_allocated, self.total_recycled,
                         self.peak_live)


class MetadataRegistry:
    """Memory/context metadata for in-flight instructions, keyed by seq_id.

    Entries enter when an instruction is accepted into the entry buffer
    and leave at retirement, so the registry never grows past the ROB
    plus one entry-buffer worth of instructions.
    """

    def __init__(self):
        self._entries: dict[int, tuple] = {}
        self.peak = 0

    def insert(self, seq: int, mem, context):
        self._entries[seq] = (mem, context)
        if len(self._entries) > self.peak:
            self.peak = len(self._entries)

    def get(self, seq: int):
        return self._entries.get(seq)

    def remove(self, seq: int):
        self._entries.pop(seq, None)

    def __len__(self) -> int:
        return len(self._entries)


@dataclass(frozen=True)
class RunOutcome:
    """How a streamed run ended."""

    finished: bool
    suspended: bool = False
    truncated: bool = False


class Pipeline:
    def __init__(
        self,
        model: MachineModel,
        alias_policy: AliasPolicy = AliasPolicy.METADATA,
        entry_capacity: int = 256,
    ):
        if entry_capacity < 1:
            raise ValueError("entry_capacity must be >= 1")
        self.model = model
        self.policy = alias_policy
        self.entry_capacity = entry_capacity

        self.cycle = 0
        self.suspended = False
        self.entry: deque[InstrRecord] = deque()
        self.rob: deque[InstrRecord] = deque()
        self.live: dict[int, InstrRecord] = {}
        self.scoreboard: dict[int, int] = {}      # register -> youngest writer
        self.consumers: dict[int, list[InstrRecord]] = {}
        self.ready: list[int] = []                # heap of ready seq ids
        self.deferred: list[int] = []             # blocked; retried next cycle
        self.executing: list[tuple[int, int]] = []  # heap (completes_at, seq)
        self.busy: dict[str, list[int]] = {
            r.name: [-1] * r.units for r in model.resources
        }
        self.queues = MemQueues(model.load_queue_size, model.store_queue_size)
        self.registry = MetadataRegistry()
        self.pool = RecyclePool()

        self.instructions_retired = 0
        self.uops_retired = 0
        self.resource_claimed: dict[str, int] = {r.name: 0 for r in model.resources}
        self.missing_metadata = 0
        self.iteration = 0
        self.retire_sink: Callable[[InstrRecord, int], None] | None = None

        self._last_seq = -1
        self._last_retire_cycle = -1
        self._dispatch_busy_until = -1
        self._claims_cache: dict[str, tuple] = {}

    # -- input -------------------------------------------------------------

    def feed(self, instructions) -> int:
        """Accept instructions into the entry buffer, up to free capacity.

        Returns how many were taken; the caller re-offers the rest later.
        Class resolution, metadata validation, and context latency lookup
        all happen here so later stages never fail.
        """
        space = self.entry_capacity - len(self.entry)
        if space <= 0:
            return 0
        accepted = 0
        model = self.model
        entry = self.entry
        pool = self.pool
        registry = self.registry
        for inst in instructions:
            if accepted >= space:
                break
            seq = inst.seq_id
            if seq <= self._last_seq:
                raise AnalysisError(
                    f"instruction {seq}: sequence id not increasing "
                    f"(previous {self._last_seq})"
                )
            cls = model.class_named(inst.class_name)
            if cls is None:
                raise AnalysisError(
                    f"instruction {seq}: unknown class '{inst.class_name}'"
                )

            loads: list = []
            stores: list = []
            for acc in inst.mem:
                if acc.kind is AccessKind.LOAD:
                    if not cls.may_load:
                        raise AnalysisError(
                            f"instruction {seq}: class '{cls.name}' "
                            "may not load"
                        )
                    loads.append(acc)
                else:
                    if not cls.may_store:
                        raise AnalysisError(
                            f"instruction {seq}: class '{cls.name}' "
                            "may not store"
                        )
                    stores.append(acc)
            missing = False
            if cls.may_load and not loads:
                loads.append(None)
                missing = True
            if cls.may_store and not stores:
                stores.append(None)
                missing = True
            if missing:
                self.missing_metadata += 1

            context = inst.context
            if context is not None and context[0] == cls.context_latency_key:
                try:
                    lat = effective_latency(model, cls, context[1])
                except AnalysisError as e:
                    raise AnalysisError(f"instruction {seq}: {e}") from None
            else:
                lat = cls.latency

            rec = pool.acquire()
            rec.seq_id = seq
            rec.cls = cls
            rec.state = _DISPATCHED
            rec.dispatched_at = -1
            rec.issued_at = -1
            rec.executed_at = -1
            rec.retired_at = -1
            rec.remaining_latency = lat
            rec.effective_latency = lat
            rec.uops = cls.num_uops
            rec.reads = inst.reads
            rec.writes = inst.writes
            rec.claims = self._claims_for(cls)
            rec.loads = tuple(loads)
            rec.stores = tuple(stores)
            rec.address = inst.address

            registry.insert(seq, inst.mem, context)
            entry.append(rec)
            self._last_seq = seq
            accepted += 1
        if accepted:
            self.suspended = False
        return accepted

    def _claims_for(self, cls: InstrClass) -> tuple:
        claims = self._claims_cache.get(cls.name)
        if claims is None:
            claims = tuple(
                (rname, self.busy[rname], cycles)
                for rname, cycles in cls.resource_usage
            )
            self._claims_cache[cls.name] = claims
        return claims

    # -- simulation --------------------------------------------------------

    def has_work(self) -> bool:
        return bool(self.entry or self.rob)

    def run_cycle(self):
        cycle = self.cycle
        live = self.live

        # 1. retire from the ROB head, in order
        rob = self.rob
        if rob and rob[0].state == _EXECUTED:
            budget = self.model.retire_width
            scoreboard = self.scoreboard
            queues = self.queues
            registry = self.registry
            pool = self.pool
            sink = self.retire_sink
            while budget > 0 and rob and rob[0].state == _EXECUTED:
                rec = rob.popleft()
                seq = rec.seq_id
                rec.state = _RETIRED
                rec.retired_at = cycle
                del live[seq]
                for reg in rec.writes:
                    if scoreboard.get(reg) == seq:
                        del scoreboard[reg]
                if rec.loads or rec.stores:
                    queues.remove(seq)
                registry.remove(seq)
                self.instructions_retired += 1
                self.uops_retired += rec.uops
                self._last_retire_cycle = cycle
                if sink is not None:
                    sink(rec, self.iteration)
                pool.release(rec)
                budget -= 1

        # 2. complete executions elapsing this cycle
        executing = self.executing
        while executing and executing[0][0] <= cycle:
            _, seq = heappop(executing)
            rec = live[seq]
            rec.state = _EXECUTED
            rec.executed_at = cycle
            rec.remaining_latency = 0
            if rec.loads or rec.stores:
                self.queues.mark_executed(seq)
            self._wake(seq)

        # 3. issue ready records oldest-first; a producer completing here
        #    (single-cycle latency) can wake and issue its consumers within
        #    the same pass, which keeps issue order equal to seq order.
        ready = self.ready
        deferred = self.deferred
        if deferred:
            for seq in deferred:
                heappush(ready, seq)
            deferred.clear()
        if ready:
            policy = self.policy
            queues = self.queues
            claimed = self.resource_claimed
            while ready:
                seq = heappop(ready)
                rec = live[seq]
                if rec.dispatched_at >= cycle:
                    deferred.append(seq)
                    continue
                loads = rec.loads
                stores = rec.stores
                if loads or stores:
                    if queues.find_blocker(policy, seq, loads, stores) is not None:
                        deferred.append(seq)
                        continue
                claims = rec.claims
                if claims:
                    granted = []
                    ok = True
                    for rname, units, occ in claims:
                        idx = -1
                        for i, busy_until in enumerate(units):
                            if busy_until < cycle:
                                idx = i
                                break
                        if idx < 0:
                            ok = False
                            break
                        granted.append((units, idx, units[idx]))
                        units[idx] = cycle + occ - 1
                    if not ok:
                        for units, idx, old in granted:
                            units[idx] = old
                        deferred.append(seq)
                        continue
                    for rname, units, occ in claims:
                        claimed[rname] += occ
                rec.issued_at = cycle
                lat = rec.effective_latency
                if lat == 1:
                    rec.state = _EXECUTED
                    rec.executed_at = cycle
                    rec.remaining_latency = 0
                    if loads or stores:
                        queues.mark_executed(seq)
                    self._wake(seq)
                else:
                    rec.state = _EXECUTING
                    rec.remaining_latency = lat - 1
                    heappush(executing, (cycle + lat - 1, seq))

        # 4. dispatch from the entry buffer while width and space allow
        entry = self.entry
        if entry and cycle > self._dispatch_busy_until:
            width = self.model.dispatch_width
            rob_size = self.model.reorder_buffer_size
            budget = width
            while entry and budget > 0:
                rec = entry[0]
                uops = rec.uops
                if uops > width:
                    # Wider than the machine: takes dispatch for whole
                    # cycles, and only starts on a fresh cycle.
                    if budget < width:
                        break
                    if len(rob) >= rob_size or not self._queue_space(rec):
                        break
                    entry.popleft()
                    span = -(-uops // width)
                    self._dispatch_busy_until = cycle + span - 1
                    self._enter_rob(rec, cycle + span - 1)
                    break
                if uops > budget:
                    break
                if len(rob) >= rob_size or not self._queue_space(rec):
                    break
                entry.popleft()
                self._enter_rob(rec, cycle)
                budget -= uops

        self.cycle = cycle + 1

    def _wake(self, producer_seq: int):
        waiters = self.consumers.pop(producer_seq, None)
        if not waiters:
            return
        ready = self.ready
        for rec in waiters:
            pending = rec.waiting_on
            pending.discard(producer_seq)
            if not pending and rec.state == _DISPATCHED:
                rec.state = _READY
                heappush(ready, rec.seq_id)

    def _queue_space(self, rec: InstrRecord) -> bool:
        if not rec.loads and not rec.stores:
            return True
        return self.queues.can_insert(len(rec.loads), len(rec.stores))

    def _enter_rob(self, rec: InstrRecord, dispatched_at: int):
        seq = rec.seq_id
        rec.dispatched_at = dispatched_at
        self.rob.append(rec)
        self.live[seq] = rec
        scoreboard = self.scoreboard
        waiting = rec.waiting_on
        consumers = self.consumers
        live = self.live
        for reg in rec.reads:
            producer = scoreboard.get(reg)
            if producer is not None and producer not in waiting:
                prec = live[producer]
                if prec.state < _EXECUTED:
                    waiting.add(producer)
                    lst = consumers.get(producer)
                    if lst is None:
                        consumers[producer] = [rec]
                    else:
                        lst.append(rec)
        for reg in rec.writes:
            scoreboard[reg] = seq
        if rec.loads or rec.stores:
            self.queues.insert(seq, rec.loads, rec.stores)
        if waiting:
            rec.state = _DISPATCHED
        else:
            rec.state = _READY
            heappush(self.ready, seq)

    # -- driving -----------------------------------------------------------

    def run_until_starved(self, broker, batch_size: int | None = None) -> RunOutcome:
        """Pump the broker through the pipeline until it runs dry.

        Keeps the entry buffer topped up before every cycle, so cycle
        counts depend only on the stream contents, never on how the
        producer batched them.  With the stream exhausted the pipeline
        drains fully; on a stalled producer it drains whatever is in
        flight, then suspends with all state preserved for a later call.
        """
        self.suspended = False
        capacity = self.entry_capacity
        batch = capacity if batch_size is None else min(batch_size, capacity)
        eos = False
        truncated = False
        while True:
            stalled = False
            while not eos and len(self.entry) < capacity:
                want = min(batch, capacity - len(self.entry))
                try:
                    got = broker.fetch_batch(want)
                except TruncatedTraceError:
                    truncated = True
                    eos = True
                    break
                if got.instructions:
                    self.feed(got.instructions)
                if got.end_of_stream:
                    eos = True
                elif got.stalled or not got.instructions:
                    stalled = True
                    break
            if not self.entry and not self.rob:
                if eos:
                    return RunOutcome(finished=True, truncated=truncated)
                self.suspended = True
                return RunOutcome(finished=False, suspended=True)
            self.run_cycle()

    def run_trace(self, instructions, batch_size: int | None = None) -> RunOutcome:
        """Convenience: run a fully materialized instruction sequence."""
        from .brokers import SequenceBroker

        return self.run_until_starved(SequenceBroker(instructions), batch_size)

    def drain(self):
        """Run cycles until everything in flight has retired."""
        while self.entry or self.rob:
            self.run_cycle()

    # -- results -----------------------------------------------------------

    @property
    def total_cycles(self) -> int:
        """Cycles consumed so far: last retirement cycle + 1, 0 if none."""
        return self._last_retire_cycle + 1

    def pool_stats(self) -> PoolStats:
        return self.pool.stats()
