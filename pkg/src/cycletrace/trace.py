"""Trace instruction types plus the text and wire encodings.

One trace line per dynamically executed instruction:

    I <seq> <hex-addr> <class> R:<regs> W:<regs> [L:<addr>:<size>]...
        [S:<addr>:<size>]... [C:<key>=<value>]

Register lists are comma separated; '-' means empty.  '#' starts a
comment.  The wire encoding mirrors the same fields as a JSON object.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

from .errors import ProtocolError, TraceParseError

U64_LIMIT = 1 << 64


class AccessKind(Enum):
    LOAD = "load"
    STORE = "store"


@dataclass(frozen=True, slots=True)
class MemoryAccess:
    kind: AccessKind
    address: int
    size: int


@dataclass(slots=True)
class TraceInstruction:
    seq_id: int
    address: int
    class_name: str
    reads: tuple[int, ...] = ()
    writes: tuple[int, ...] = ()
    mem: tuple[MemoryAccess, ...] = ()
    context: tuple[str, str] | None = None


@dataclass(frozen=True, slots=True)
class Batch:
    """A slice of the instruction stream handed to the consumer.

    An empty batch is meaningful only in two distinguished states: the
    stream is over (end_of_stream) or the producer has nothing ready yet
    (stalled).  The final instructions of a stream may share a batch with
    the end_of_stream flag.
    """

    instructions: tuple[TraceInstruction, ...] = ()
    end_of_stream: bool = False
    stalled: bool = False


def _check_access(address: int, size: int, line: int | None = None):
    if not 0 <= address < U64_LIMIT:
        raise TraceParseError(f"address {address:#x} out of range", line)
    if size < 1:
        raise TraceParseError(f"access size {size} must be >= 1", line)
    if address + size > U64_LIMIT:
        raise TraceParseError(
            f"access at {address:#x} size {size} wraps past 2^64", line
        )


def _parse_reg(token: str, line: int | None) -> int:
    # Producers may prefix register numbers with a letter (r13, x2).
    body = token[1:] if token and token[0].isalpha() else token
    if not body.isdigit():
        raise TraceParseError(f"bad register token '{token}'", line)
    return int(body)


def _parse_reg_list(f: str, line: int | None) -> tuple[int, ...]:
    if f == "-" or f == "":
        return ()
    return tuple(_parse_reg(tok, line) for tok in f.split(","))


def _parse_int(token: str, line: int | None, what: str) -> int:
    try:
        return int(token, 0)
    except ValueError:
        raise TraceParseError(f"bad {what} '{token}'", line) from None


def parse_trace_line(text: str, line: int | None = None) -> TraceInstruction | None:
    """Parse one line; returns None for blanks and comments."""
    body = text.split("#", 1)[0].strip()
    if not body:
        return None
    fields = body.split()
    if fields[0] != "I":
        raise TraceParseError(f"expected 'I' record, got '{fields[0]}'", line)
    if len(fields) < 6:
        raise TraceParseError("truncated instruction record", line)
    seq = _parse_int(fields[1], line, "sequence id")
    if seq < 0:
        raise TraceParseError(f"negative sequence id {seq}", line)
    addr = _parse_int(fields[2], line, "address")
    if not 0 <= addr < U64_LIMIT:
        raise TraceParseError(f"address {addr:#x} out of range", line)
    class_name = fields[3]
    if not fields[4].startswith("R:") or not fields[5].startswith("W:"):
        raise TraceParseError("expected R: and W: register lists", line)
    reads = _parse_reg_list(fields[4][2:], line)
    writes = _parse_reg_list(fields[5][2:], line)

    mem: list[MemoryAccess] = []
    context: tuple[str, str] | None = None
    for tok in fields[6:]:
        if tok.startswith("L:") or tok.startswith("S:"):
            kind = AccessKind.LOAD if tok[0] == "L" else AccessKind.STORE
            parts = tok[2:].split(":")
            if len(parts) != 2:
                raise TraceParseError(f"bad memory token '{tok}'", line)
            a = _parse_int(parts[0], line, "memory address")
            s = _parse_int(parts[1], line, "memory size")
            _check_access(a, s, line)
            mem.append(MemoryAccess(kind, a, s))
        elif tok.startswith("C:"):
            if context is not None:
                raise TraceParseError("multiple context tokens", line)
            kv = tok[2:].split("=", 1)
            if len(kv) != 2 or not kv[0]:
                raise TraceParseError(f"bad context token '{tok}'", line)
            context = (kv[0], kv[1])
        else:
            raise TraceParseError(f"unrecognized token '{tok}'", line)

    return TraceInstruction(
        seq_id=seq,
        address=addr,
        class_name=class_name,
        reads=reads,
        writes=writes,
        mem=tuple(mem),
        context=context,
    )


def iter_trace_text(text: str) -> Iterator[TraceInstruction]:
    """Yield instructions from trace text, enforcing seq_id monotonicity."""
    last_seq = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        inst = parse_trace_line(raw, lineno)
        if inst is None:
            continue
        if inst.seq_id <= last_seq:
            raise TraceParseError(
                f"sequence id {inst.seq_id} not greater than previous "
                f"{last_seq}", lineno,
            )
        last_seq = inst.seq_id
        yield inst


def parse_trace(text: str) -> list[TraceInstruction]:
    return list(iter_trace_text(text))


def _render_regs(regs: tuple[int, ...]) -> str:
    return ",".join(str(r) for r in regs) if regs else "-"


def render_instruction(inst: TraceInstruction) -> str:
    parts = [
        "I",
        str(inst.seq_id),
        f"{inst.address:#x}",
        inst.class_name,
        "R:" + _render_regs(inst.reads),
        "W:" + _render_regs(inst.writes),
    ]
    for acc in inst.mem:
        tag = "L" if acc.kind is AccessKind.LOAD else "S"
        parts.append(f"{tag}:{acc.address:#x}:{acc.size}")
    if inst.context is not None:
        parts.append(f"C:{inst.context[0]}={inst.context[1]}")
    return " ".join(parts)


def render_trace(instructions: Iterable[TraceInstruction]) -> str:
    return "".join(render_instruction(i) + "\n" for i in instructions)


# ---------------------------------------------------------------------------
# Wire encoding (JSON object per instruction, used inside stream frames)

def to_wire(inst: TraceInstruction) -> dict:
    obj = {
        "seq": inst.seq_id,
        "addr": inst.address,
        "class": inst.class_name,
        "reads": list(inst.reads),
        "writes": list(inst.writes),
    }
    if inst.mem:
        obj["mem"] = [
            {
                "kind": "L" if a.kind is AccessKind.LOAD else "S",
                "addr": a.address,
                "size": a.size,
            }
            for a in inst.mem
        ]
    if inst.context is not None:
        # Context values compare as text everywhere; normalize here so a
        # producer-side non-string value survives the wire.
        obj["ctx"] = [inst.context[0], str(inst.context[1])]
    return obj


def _wire_int(obj: dict, key: str) -> int:
    v = obj.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ProtocolError(f"instruction field '{key}' must be an integer")
    return v


def _wire_regs(obj: dict, key: str) -> tuple[int, ...]:
    v = obj.get(key, [])
    if not isinstance(v, list) or any(
        not isinstance(r, int) or isinstance(r, bool) for r in v
    ):
        raise ProtocolError(f"instruction field '{key}' must be a list of "
                            "integers")
    return tuple(v)


def from_wire(obj: dict) -> TraceInstruction:
    if not isinstance(obj, dict):
        raise ProtocolError("instruction frame entry must be an object")
    seq = _wire_int(obj, "seq")
    if seq < 0:
        raise ProtocolError(f"negative sequence id {seq}")
    addr = _wire_int(obj, "addr")
    if not 0 <= addr < U64_LIMIT:
        raise ProtocolError(f"address {addr:#x} out of range")
    cname = obj.get("class")
    if not isinstance(cname, str) or not cname:
        raise ProtocolError("instruction field 'class' must be a string")

    mem: list[MemoryAccess] = []
    for entry in obj.get("mem", []):
        if not isinstance(entry, dict):
            raise ProtocolError("memory entry must be an object")
        kind = entry.get("kind")
        if kind == "L":
            k = AccessKind.LOAD
        elif kind == "S":
            k = AccessKind.STORE
        else:
            raise ProtocolError(f"bad memory kind {kind!r}")
        a = _wire_int(entry, "addr")
        s = _wire_int(entry, "size")
        try:
            _check_access(a, s)
        except TraceParseError as e:
            raise ProtocolError(str(e)) from None
        mem.append(MemoryAccess(k, a, s))

    context = None
    ctx = obj.get("ctx")
    if ctx is not None:
        if (
            not isinstance(ctx, list) or len(ctx) != 2
            or not all(isinstance(x, str) for x in ctx)
        ):
            raise ProtocolError("instruction field 'ctx' must be a pair of "
                                "strings")
        context = (ctx[0], ctx[1])

    return TraceInstruction(
        seq_id=seq,
        address=addr,
        class_name=cname,
        reads=_wire_regs(obj, "reads"),
        writes=_wire_regs(obj, "writes"),
        mem=tuple(mem),
        context=context,
    )
