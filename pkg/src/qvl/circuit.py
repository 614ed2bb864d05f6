"""Ordered, register-tagged gate programs.

A CircuitProgram is the explicit intermediate form that noise weaving, gate
counting and syndrome-round placement operate on before anything touches a
statevector.  Programs are immutable after construction and freely shareable
across trajectory workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

ROTATION_KINDS = frozenset({"RX", "RY", "RZ"})
TWO_QUBIT_KINDS = frozenset({"CNOT", "SWAP"})
ERROR_KINDS = frozenset({"PAULI_ERROR_X", "PAULI_ERROR_Y", "PAULI_ERROR_Z"})
GATE_KINDS = frozenset(
    {"X", "H", "RX", "RY", "RZ", "CNOT", "SWAP", "SYNDROME_MEASURE"}
) | ERROR_KINDS


class Register(str, Enum):
    PHYSICAL = "physical"
    ROTATION_ANCILLA = "ancilla"
    SYNDROME = "syndrome"


class Block(str, Enum):
    PREPARE = "Prepare"
    LRX = "LRX"
    LRZ = "LRZ"
    LCNOT = "LCNOT"
    LRY = "LRY"
    READOUT = "Readout"


@dataclass(frozen=True)
class QubitIndex:
    """A qubit handle: stable position plus the register it belongs to."""

    index: int
    register: Register

    def __repr__(self) -> str:
        return f"{self.register.value[0]}{self.index}"


@dataclass(frozen=True)
class GateOp:
    kind: str
    qubits: tuple[QubitIndex, ...]
    angle: float | None = None
    block_tag: str = Block.PREPARE.value

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        expected = 2 if self.kind in TWO_QUBIT_KINDS else 1
        if len(self.qubits) != expected:
            raise ValueError(
                f"{self.kind} takes {expected} qubit(s), got {len(self.qubits)}")
        if self.kind in TWO_QUBIT_KINDS and self.qubits[0].index == self.qubits[1].index:
            raise ValueError(f"{self.kind} qubits must differ")
        if (self.angle is not None) != (self.kind in ROTATION_KINDS):
            raise ValueError(
                f"angle must be present iff kind is a rotation ({self.kind})")

    @property
    def is_error(self) -> bool:
        return self.kind in ERROR_KINDS

    @property
    def is_measurement(self) -> bool:
        return self.kind == "SYNDROME_MEASURE"

    @property
    def counts_as_gate(self) -> bool:
        """True for ops on the environmental-noise gate clock."""
        return not (self.is_error or self.is_measurement)


@dataclass(frozen=True)
class CircuitProgram:
    """Ordered op list with qubit allocations and block-boundary anchors.

    ``births[i]`` is the op position at which qubit i comes into existence;
    anchors mark the op position just past each logical block's last op.
    """

    ops: tuple[GateOp, ...]
    qubit_table: tuple[QubitIndex, ...]
    births: tuple[int, ...]
    anchors: tuple[int, ...] = ()

    def __post_init__(self):
        known = {q.index for q in self.qubit_table}
        if known != set(range(len(self.qubit_table))):
            raise ValueError("qubit_table indices must be 0..n-1")
        for op in self.ops:
            for q in op.qubits:
                if q.index not in known:
                    raise ValueError(f"op references unknown qubit {q}")
        if list(self.anchors) != sorted(set(self.anchors)):
            raise ValueError("anchors must be strictly increasing")
        if self.anchors and self.anchors[-1] > len(self.ops):
            raise ValueError("anchor beyond end of ops")

    @property
    def num_qubits(self) -> int:
        return len(self.qubit_table)

    def qubits_in(self, register: Register) -> list[QubitIndex]:
        return [q for q in self.qubit_table if q.register is register]


def count_gates(program: CircuitProgram) -> int:
    """Number of gates on the environmental-noise clock.

    Every non-error, non-measurement op counts once regardless of arity.
    """
    return sum(1 for op in program.ops if op.counts_as_gate)


class ProgramBuilder:
    """Accumulates ops, allocations and anchors for a CircuitProgram."""

    def __init__(self):
        self._ops: list[GateOp] = []
        self._qubits: list[QubitIndex] = []
        self._births: list[int] = []
        self._anchors: list[int] = []
        self._block: Block = Block.PREPARE

    @property
    def ops(self) -> list[GateOp]:
        return self._ops

    @property
    def position(self) -> int:
        return len(self._ops)

    def alloc(self, register: Register) -> QubitIndex:
        q = QubitIndex(len(self._qubits), register)
        self._qubits.append(q)
        self._births.append(len(self._ops))
        return q

    def set_block(self, block: Block) -> None:
        self._block = block

    def anchor(self) -> None:
        """Record the current position as a block boundary."""
        self._anchors.append(len(self._ops))

    def add(self, kind: str, *qubits: QubitIndex, angle: float | None = None) -> GateOp:
        op = GateOp(kind, tuple(qubits), angle=angle, block_tag=self._block.value)
        self._ops.append(op)
        return op

    def extend(self, ops: Iterable[GateOp]) -> None:
        self._ops.extend(ops)

    def build(self) -> CircuitProgram:
        return CircuitProgram(
            ops=tuple(self._ops),
            qubit_table=tuple(self._qubits),
            births=tuple(self._births),
            anchors=tuple(self._anchors),
        )


def build_bare_vqc(input_bits: tuple[int, int], theta: float) -> CircuitProgram:
    """The unencoded 2-qubit parity classifier.

    Basis-encoding X gates for 1-bits, then RX on both qubits, RZ on both,
    CNOT(q0 -> q1), RY on both.  Measurement of q0 is the caller's job.
    """
    b0, b1 = input_bits
    if b0 not in (0, 1) or b1 not in (0, 1):
        raise ValueError(f"input bits must be 0/1, got {input_bits!r}")
    builder = ProgramBuilder()
    q0 = builder.alloc(Register.PHYSICAL)
    q1 = builder.alloc(Register.PHYSICAL)
    builder.set_block(Block.PREPARE)
    if b0:
        builder.add("X", q0)
    if b1:
        builder.add("X", q1)
    builder.anchor()
    builder.set_block(Block.LRX)
    builder.add("RX", q0, angle=theta)
    builder.add("RX", q1, angle=theta)
    builder.anchor()
    builder.set_block(Block.LRZ)
    builder.add("RZ", q0, angle=theta)
    builder.add("RZ", q1, angle=theta)
    builder.anchor()
    builder.set_block(Block.LCNOT)
    builder.add("CNOT", q0, q1)
    builder.anchor()
    builder.set_block(Block.LRY)
    builder.add("RY", q0, angle=theta)
    builder.add("RY", q1, angle=theta)
    builder.anchor()
    return builder.build()


# -- text serialization ------------------------------------------------------

_REG_NAMES = {r.value: r for r in Register}


def serialize_program(program: CircuitProgram) -> str:
    """One op per line: kind, qubit indices, angle, block_tag."""
    lines = [f"qubits {program.num_qubits}"]
    for q, born in zip(program.qubit_table, program.births):
        lines.append(f"qubit {q.index} {q.register.value} {born}")
    lines.append("anchors " + " ".join(str(a) for a in program.anchors))
    for op in program.ops:
        ids = ",".join(str(q.index) for q in op.qubits)
        angle = repr(op.angle) if op.angle is not None else "-"
        lines.append(f"op {op.kind} {ids} {angle} {op.block_tag}")
    return "\n".join(lines) + "\n"


def parse_program(text: str) -> CircuitProgram:
    qubits: list[QubitIndex] = []
    births: list[int] = []
    anchors: tuple[int, ...] = ()
    ops: list[GateOp] = []
    table: dict[int, QubitIndex] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "qubits":
            continue
        if parts[0] == "qubit":
            idx, reg, born = int(parts[1]), parts[2], int(parts[3])
            q = QubitIndex(idx, _REG_NAMES[reg])
            qubits.append(q)
            births.append(born)
            table[idx] = q
        elif parts[0] == "anchors":
            anchors = tuple(int(a) for a in parts[1:])
        elif parts[0] == "op":
            kind, ids, angle_s, tag = parts[1], parts[2], parts[3], parts[4]
            qs = tuple(table[int(i)] for i in ids.split(","))
            angle = None if angle_s == "-" else float(angle_s)
            ops.append(GateOp(kind, qs, angle=angle, block_tag=tag))
        else:
            raise ValueError(f"unparseable line: {raw!r}")
    return CircuitProgram(tuple(ops), tuple(qubits), tuple(births), anchors)
