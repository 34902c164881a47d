"""A tiny assembly language whose interpreter emits traces.

The point of the toy ISA is generating ground-truth instruction streams
with real control flow and real addresses, without depending on any
outside tooling.  Programs are line oriented:

    .map <opcode> <class>     # trace class for an opcode (default: opcode)
    .entry <label>
    label:
    const rD, <imm>
    add   rD, rA, rB          # also: mul, cmp (cmp computes rA - rB)
    load  rD, rA              # rD = mem64[rA]
    store rV, rA              # mem64[rA] = rV
    ble   rA, rB, <label>     # branch if rA <= rB, signed
    jump  <label>
    halt
    setctx <key>=<value>      # context attached to subsequent instructions

Registers are r0..r31, 64-bit, wrapping.  Memory is byte addressable;
loads and stores move 8 bytes; unwritten memory reads as zero.
Execution is pure: the same program always yields the same trace.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CycleTraceError, TraceParseError, TruncatedTraceError
from .trace import AccessKind, MemoryAccess, TraceInstruction

U64 = 1 << 64
BASE_ADDRESS = 0x400000
INSTR_SPACING = 4
ACCESS_SIZE = 8


class ProgramError(CycleTraceError):
    """The toy program performed an impossible operation at run time."""


@dataclass(frozen=True, slots=True)
class ToyOp:
    opcode: str
    regs: tuple[int, ...] = ()
    imm: int | None = None
    target: int | None = None
    key: str | None = None
    value: str | None = None
    line: int = 0


@dataclass(frozen=True)
class ToyProgram:
    instructions: tuple[ToyOp, ...]
    labels: dict[str, int]
    entry: int
    class_map: dict[str, str]

    def address_of(self, index: int) -> int:
        return BASE_ADDRESS + INSTR_SPACING * index

    def label_address(self, label: str) -> int:
        return self.address_of(self.labels[label])


_OPCODES = {
    "const", "add", "mul", "cmp", "load", "store",
    "ble", "jump", "halt", "setctx",
}


def _parse_reg(token: str, line: int) -> int:
    if len(token) < 2 or token[0] != "r" or not token[1:].isdigit():
        raise TraceParseError(f"expected register, got '{token}'", line)
    n = int(token[1:])
    if n > 31:
        raise TraceParseError(f"register r{n} out of range (r0..r31)", line)
    return n


def _parse_imm(token: str, line: int) -> int:
    try:
        return int(token, 0)
    except ValueError:
        raise TraceParseError(f"bad immediate '{token}'", line) from None


def parse_program(text: str) -> ToyProgram:
    class_map: dict[str, str] = {}
    labels: dict[str, int] = {}
    entry_label: str | None = None
    pending: list[tuple[int, str, list[str], str | None]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith(".map"):
            parts = body.split()
            if len(parts) != 3:
                raise TraceParseError(".map takes an opcode and a class", lineno)
            if parts[1] not in _OPCODES:
                raise TraceParseError(f"unknown opcode '{parts[1]}' in .map", lineno)
            class_map[parts[1]] = parts[2]
            continue
        if body.startswith(".entry"):
            parts = body.split()
            if len(parts) != 2:
                raise TraceParseError(".entry takes one label", lineno)
            entry_label = parts[1]
            continue
        if body.startswith("."):
            raise TraceParseError(f"unknown directive '{body.split()[0]}'", lineno)

        while body and ":" in body.split()[0]:
            label, _, rest = body.partition(":")
            label = label.strip()
            if not label or " " in label:
                raise TraceParseError(f"bad label '{label}'", lineno)
            if label in labels:
                raise TraceParseError(f"duplicate label '{label}'", lineno)
            labels[label] = len(pending)
            body = rest.strip()
        if not body:
            continue

        tokens = body.replace(",", " ").split()
        opcode = tokens[0]
        if opcode not in _OPCODES:
            raise TraceParseError(f"unknown opcode '{opcode}'", lineno)
        target_label: str | None = None
        operands = tokens[1:]
        if opcode in ("ble", "jump"):
            if not operands:
                raise TraceParseError(f"'{opcode}' needs a target label", lineno)
            target_label = operands[-1]
            operands = operands[:-1]
        pending.append((lineno, opcode, operands, target_label))

    ops: list[ToyOp] = []
    for lineno, opcode, operands, target_label in pending:
        target = None
        if target_label is not None:
            if target_label not in labels:
                raise TraceParseError(
                    f"undefined label '{target_label}'", lineno
                )
            target = labels[target_label]

        def want(n: int):
            if len(operands) != n:
                raise TraceParseError(
                    f"'{opcode}' takes {n} operand(s), got {len(operands)}",
                    lineno,
                )

        if opcode == "const":
            want(2)
            ops.append(ToyOp(
                opcode, regs=(_parse_reg(operands[0], lineno),),
                imm=_parse_imm(operands[1], lineno), line=lineno,
            ))
        elif opcode in ("add", "mul", "cmp"):
            want(3)
            ops.append(ToyOp(
                opcode,
                regs=tuple(_parse_reg(t, lineno) for t in operands),
                line=lineno,
            ))
        elif opcode in ("load", "store"):
            want(2)
            ops.append(ToyOp(
                opcode,
                regs=tuple(_parse_reg(t, lineno) for t in operands),
                line=lineno,
            ))
        elif opcode == "ble":
            want(2)
            ops.append(ToyOp(
                opcode,
                regs=tuple(_parse_reg(t, lineno) for t in operands),
                target=target, line=lineno,
            ))
        elif opcode == "jump":
            want(0)
            ops.append(ToyOp(opcode, target=target, line=lineno))
        elif opcode == "halt":
            want(0)
            ops.append(ToyOp(opcode, line=lineno))
        elif opcode == "setctx":
            want(1)
            kv = operands[0].split("=", 1)
            if len(kv) != 2 or not kv[0]:
                raise TraceParseError("setctx takes key=value", lineno)
            ops.append(ToyOp(opcode, key=kv[0], value=kv[1], line=lineno))

    if not ops:
        raise TraceParseError("program has no instructions")
    if entry_label is not None:
        if entry_label not in labels:
            raise TraceParseError(f"undefined entry label '{entry_label}'")
        entry = labels[entry_label]
    else:
        entry = 0
    for label, index in labels.items():
        if index >= len(ops):
            raise TraceParseError(f"label '{label}' points past the program")
    return ToyProgram(
        instructions=tuple(ops),
        labels=labels,
        entry=entry,
        class_map=class_map,
    )


def _signed(v: int) -> int:
    return v - U64 if v >= (U64 >> 1) else v


def execute(program: ToyProgram, max_steps: int = 100_000) -> list[TraceInstruction]:
    """Run a program, returning the trace of executed instructions.

    Raises TruncatedTraceError carrying the partial trace when the step
    budget runs out before halt.
    """
    regs = [0] * 32
    mem: dict[int, int] = {}
    context: tuple[str, str] | None = None
    pc = program.entry
    ops = program.instructions
    class_map = program.class_map
    trace: list[TraceInstruction] = []

    while True:
        if len(trace) >= max_steps:
            raise TruncatedTraceError(
                f"step budget of {max_steps} exhausted before halt",
                partial=trace,
            )
        if not 0 <= pc < len(ops):
            raise ProgramError(
                f"execution ran past the program (pc={pc})"
            )
        op = ops[pc]
        address = program.address_of(pc)
        cname = class_map.get(op.opcode, op.opcode)
        seq = len(trace)
        next_pc = pc + 1
        reads: tuple[int, ...] = ()
        writes: tuple[int, ...] = ()
        accesses: tuple[MemoryAccess, ...] = ()

        opcode = op.opcode
        if opcode == "const":
            d = op.regs[0]
            regs[d] = op.imm % U64
            writes = (d,)
        elif opcode in ("add", "mul", "cmp"):
            d, a, b = op.regs
            if opcode == "add":
                regs[d] = (regs[a] + regs[b]) % U64
            elif opcode == "mul":
                regs[d] = (regs[a] * regs[b]) % U64
            else:
                regs[d] = (regs[a] - regs[b]) % U64
            reads = (a, b)
            writes = (d,)
        elif opcode == "load":
            d, a = op.regs
            addr = regs[a]
            if addr + ACCESS_SIZE > U64:
                raise ProgramError(
                    f"load at {addr:#x} wraps past the address space "
                    f"(line {op.line})"
                )
            value = 0
            for i in range(ACCESS_SIZE):
                value |= mem.get(addr + i, 0) << (8 * i)
            regs[d] = value
            reads = (a,)
            writes = (d,)
            accesses = (MemoryAccess(AccessKind.LOAD, addr, ACCESS_SIZE),)
        elif opcode == "store":
            v, a = op.regs
            addr = regs[a]
            if addr + ACCESS_SIZE > U64:
                raise ProgramError(
                    f"store at {addr:#x} wraps past the address space "
                    f"(line {op.line})"
                )
            value = regs[v]
            for i in range(ACCESS_SIZE):
                mem[addr + i] = (value >> (8 * i)) & 0xFF
            reads = (v, a)
            accesses = (MemoryAccess(AccessKind.STORE, addr, ACCESS_SIZE),)
        elif opcode == "ble":
            a, b = op.regs
            reads = (a, b)
            if _signed(regs[a]) <= _signed(regs[b]):
                next_pc = op.target
        elif opcode == "jump":
            next_pc = op.target
        elif opcode == "halt":
            pass
        elif opcode == "setctx":
            pass

        trace.append(TraceInstruction(
            seq_id=seq,
            address=address,
            class_name=cname,
            reads=reads,
            writes=writes,
            mem=accesses,
            context=context,
        ))

        if opcode == "setctx":
            context = (op.key, op.value)
        if opcode == "halt":
            return trace
        pc = next_pc
