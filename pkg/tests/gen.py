"""Builders and randomized generators shared across the test suite.

The random generators deliberately use tiny register and address spaces
so that dependency chains, resource contention, and memory conflicts all
occur constantly, not occasionally.
"""

from __future__ import annotations

import random

from cycletrace import (
    AccessKind,
    AliasPolicy,
    InstrClass,
    MachineModel,
    MemoryAccess,
    Pipeline,
    ResourceDesc,
    TimelineRecorder,
    TraceInstruction,
)


def make_model(
    classes,
    *,
    name="m",
    width=2,
    retire=None,
    rob=32,
    lq=16,
    sq=16,
    resources=(),
    tables=None,
) -> MachineModel:
    return MachineModel(
        name=name,
        dispatch_width=width,
        retire_width=width if retire is None else retire,
        reorder_buffer_size=rob,
        load_queue_size=lq,
        store_queue_size=sq,
        resources=tuple(ResourceDesc(n, u) for n, u in resources),
        classes=tuple(classes),
        context_latency_tables=tables or {},
    )


def make_class(
    name,
    latency,
    *,
    uops=1,
    uses=(),
    may_load=False,
    may_store=False,
    is_branch=False,
    context_key=None,
) -> InstrClass:
    return InstrClass(
        name=name,
        latency=latency,
        num_uops=uops,
        resource_usage=tuple(uses),
        may_load=may_load,
        may_store=may_store,
        is_branch=is_branch,
        context_latency_key=context_key,
    )


def ti(
    seq,
    cls,
    *,
    reads=(),
    writes=(),
    loads=(),
    stores=(),
    address=None,
    context=None,
) -> TraceInstruction:
    mem = tuple(
        MemoryAccess(AccessKind.LOAD, a, s) for a, s in loads
    ) + tuple(
        MemoryAccess(AccessKind.STORE, a, s) for a, s in stores
    )
    return TraceInstruction(
        seq_id=seq,
        address=0x400000 + 4 * seq if address is None else address,
        class_name=cls,
        reads=tuple(reads),
        writes=tuple(writes),
        mem=mem,
        context=context,
    )


def simple_model(**overrides) -> MachineModel:
    """Small fixed model most unit tests share."""
    defaults = dict(
        width=2,
        rob=32,
        resources=[("ALU", 1), ("MEM", 1)],
        classes=[
            make_class("add", 1, uses=[("ALU", 1)]),
            make_class("mul", 3, uses=[("ALU", 1)]),
            make_class("load", 4, may_load=True, uses=[("MEM", 1)]),
            make_class("store", 1, may_store=True, uses=[("MEM", 1)]),
            make_class("nop", 1),
        ],
    )
    classes = overrides.pop("classes", defaults.pop("classes"))
    defaults.update(overrides)
    return make_model(classes, **defaults)


def run_recorded(model, insts, *, policy=AliasPolicy.METADATA, batch=None):
    """Run a trace to completion; return (pipeline, rows sorted by seq)."""
    pipe = Pipeline(model, policy)
    recorder = TimelineRecorder().attach(pipe)
    outcome = pipe.run_trace(insts, batch)
    assert outcome.finished
    return pipe, sorted(recorder.rows, key=lambda r: r.seq_id)


def times_of(rows):
    """(dispatched, issued, executed, retired) per row, in seq order."""
    return [
        (r.dispatched_at, r.issued_at, r.executed_at, r.retired_at)
        for r in rows
    ]


# ---------------------------------------------------------------------------
# Randomized models and traces

def random_model(rng: random.Random) -> MachineModel:
    width = rng.choice([1, 2, 2, 4])
    rob = rng.choice([4, 8, 16, 48])
    classes = [
        make_class("alu", rng.randint(1, 3), uses=[("P0", 1)]),
        make_class("slow", rng.randint(3, 6), uses=[("P0", rng.randint(1, 2))]),
        make_class("mul", rng.randint(3, 5), uses=[("P1", rng.randint(1, 3))]),
        make_class("pair", rng.randint(1, 3), uops=2,
                   uses=[("P0", 1), ("P1", 1)]),
        make_class("wide", rng.randint(1, 3), uops=width + rng.randint(1, 5),
                   uses=[("P1", 1)]),
        make_class("ld", rng.randint(2, 5), may_load=True, uses=[("P2", 1)]),
        make_class("st", rng.randint(1, 2), may_store=True, uses=[("P2", 1)]),
        make_class("ctx", 2, uses=[("P0", 1)], context_key="sz"),
        make_class("fence", 1, may_load=True, may_store=True),
        make_class("skip", 1),
    ]
    return make_model(
        classes,
        name=f"fuzz-w{width}",
        width=width,
        retire=rng.choice([1, 2, 4]),
        rob=rob,
        lq=rng.choice([2, 4, 16]),
        sq=rng.choice([2, 4, 16]),
        resources=[
            ("P0", rng.randint(1, 2)),
            ("P1", rng.randint(1, 3)),
            ("P2", 1),
        ],
        tables={"sz": {"1": 1, "2": 2, "4": 4, "8": 8}},
    )


_CLASS_WEIGHTS = [
    ("alu", 6), ("slow", 2), ("mul", 2), ("pair", 2), ("wide", 1),
    ("ld", 3), ("st", 3), ("ctx", 1), ("fence", 1), ("skip", 2),
]


def random_trace(rng: random.Random, n: int) -> list[TraceInstruction]:
    names = [c for c, w in _CLASS_WEIGHTS for _ in range(w)]
    out = []
    for seq in range(n):
        cls = rng.choice(names)
        reads = tuple(
            rng.randrange(8) for _ in range(rng.randint(0, 2))
        )
        writes = (rng.randrange(8),) if rng.random() < 0.8 else ()
        loads = []
        stores = []
        if cls == "ld" and rng.random() < 0.9:
            loads.append((0x1000 + 8 * rng.randrange(6), rng.choice([1, 4, 8])))
        if cls == "st" and rng.random() < 0.9:
            stores.append((0x1000 + 8 * rng.randrange(6), rng.choice([1, 4, 8])))
        context = None
        if cls == "ctx":
            context = ("sz", rng.choice(["1", "2", "4", "8"]))
        elif rng.random() < 0.05:
            context = ("hint", "ignored")  # non-matching key: no effect
        out.append(ti(
            seq, cls,
            reads=reads,
            writes=writes,
            loads=loads,
            stores=stores,
            context=context,
        ))
    return out
