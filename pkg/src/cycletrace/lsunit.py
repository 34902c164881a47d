"""Load-store unit: alias policies, memory queues, issue admission.

A memory instruction occupies one queue slot per access (loads in the
load queue, stores in the store queue) from dispatch until retirement.
At issue time the unit admits the instruction only if every older,
not-yet-executed queue entry it conflicts with has drained:

  * a load must wait for conflicting older stores;
  * a store must wait for conflicting older stores and older loads;
  * loads never block other loads, under any policy.

What "conflicts" means is the alias policy.  ALL assumes any two memory
operations may touch the same bytes; NONE assumes none do; METADATA
compares the actual byte ranges.  An access slot with no metadata (the
producer traced the instruction but not its addresses) is represented by
None and conservatively conflicts with everything under METADATA.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .trace import MemoryAccess


class AliasPolicy(Enum):
    ALL = "all"
    NONE = "none"
    METADATA = "metadata"


def ranges_overlap(a_start: int, a_size: int, b_start: int, b_size: int) -> bool:
    """True when the half-open byte intervals intersect."""
    return not (a_start + a_size <= b_start or b_start + b_size <= a_start)


def _conflicts(
    policy: AliasPolicy,
    a: MemoryAccess | None,
    b: MemoryAccess | None,
) -> bool:
    if policy is AliasPolicy.NONE:
        return False
    if policy is AliasPolicy.ALL:
        return True
    if a is None or b is None:
        return True
    return ranges_overlap(a.address, a.size, b.address, b.size)


@dataclass(slots=True)
class _Entry:
    accesses: tuple
    done: bool = False


@dataclass
class MemQueues:
    """In-flight memory operations, ordered by sequence id."""

    lq_size: int
    sq_size: int
    _lq: dict[int, _Entry] = field(default_factory=dict)
    _sq: dict[int, _Entry] = field(default_factory=dict)
    _lq_used: int = 0
    _sq_used: int = 0

    def can_insert(self, n_loads: int, n_stores: int) -> bool:
        return (
            self._lq_used + n_loads <= self.lq_size
            and self._sq_used + n_stores <= self.sq_size
        )

    def insert(self, seq: int, loads: tuple, stores: tuple):
        if loads:
            self._lq[seq] = _Entry(loads)
            self._lq_used += len(loads)
        if stores:
            self._sq[seq] = _Entry(stores)
            self._sq_used += len(stores)

    def mark_executed(self, seq: int):
        e = self._lq.get(seq)
        if e is not None:
            e.done = True
        e = self._sq.get(seq)
        if e is not None:
            e.done = True

    def remove(self, seq: int):
        e = self._lq.pop(seq, None)
        if e is not None:
            self._lq_used -= len(e.accesses)
        e = self._sq.pop(seq, None)
        if e is not None:
            self._sq_used -= len(e.accesses)

    def find_blocker(
        self,
        policy: AliasPolicy,
        seq: int,
        loads: tuple,
        stores: tuple,
    ) -> int | None:
        """Youngest older in-flight entry blocking issue, or None to admit."""
        blocker = None
        # Loads wait on conflicting older stores.
        if loads:
            blocker = self._scan(self._sq, policy, seq, loads, blocker)
        # Stores wait on conflicting older stores and older loads.
        if stores:
            blocker = self._scan(self._sq, policy, seq, stores, blocker)
            blocker = self._scan(self._lq, policy, seq, stores, blocker)
        return blocker

    @staticmethod
    def _scan(queue, policy, seq, accesses, blocker):
        for other_seq, entry in queue.items():
            if other_seq >= seq:
                break  # insertion is in seq order; the rest are younger
            if entry.done:
                continue
            for b in entry.accesses:
                if any(_conflicts(policy, a, b) for a in accesses):
                    if blocker is None or other_seq > blocker:
                        blocker = other_seq
                    break
        return blocker
