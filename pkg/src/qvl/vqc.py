"""Full classifier programs and trajectory execution.

Assembles the logically encoded parity classifier (codeword preparation,
the three rotation layers, the SWAP-based logical CNOT, and syndrome
rounds at block boundaries) and runs programs on the statevector engine
one stochastic trajectory at a time.

Syndrome qubits are measured once and never touched again, so the executor
drops them from the state immediately after collapse; the live state never
exceeds 12 qubits even for the 20-qubit five-round program.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .circuit import (Block, CircuitProgram, ProgramBuilder, QubitIndex,
                      Register, build_bare_vqc)
from .code422 import SyndromeOutcome, encode_logical, logical_cnot, syndrome_round
from .engine import Statevector
from .rotations import (AncillaRegistry, logical_rx_pair, logical_ry_pair,
                        logical_rz_pair)

ANCHOR_BLOCKS = (Block.PREPARE, Block.LRX, Block.LRZ, Block.LCNOT, Block.LRY)
MAX_ROUNDS = len(ANCHOR_BLOCKS)


def round_blocks_for(rounds: int) -> tuple[Block, ...]:
    """Blocks whose end gets a syndrome round: the last ``rounds`` anchors.

    The pre-measurement anchor (end of LRY) is always used first, so
    detection sits closest to readout.
    """
    if not 0 <= rounds <= MAX_ROUNDS:
        raise ValueError(f"rounds must be 0..{MAX_ROUNDS}, got {rounds}")
    return ANCHOR_BLOCKS[MAX_ROUNDS - rounds:]


@dataclass(frozen=True)
class LogicalVqc:
    """A built logical classifier program plus its register bookkeeping."""

    program: CircuitProgram
    physical: tuple[QubitIndex, ...]
    registry: AncillaRegistry
    input_bits: tuple[int, int]
    theta: float
    rounds: int


def build_logical_vqc(input_bits: tuple[int, int], theta: float,
                      rounds: int = 0,
                      round_blocks: tuple[Block, ...] | None = None
                      ) -> LogicalVqc:
    """Encode the two-qubit classifier into the [[4,2,2]] code.

    ``round_blocks`` overrides the default last-``rounds``-anchors
    placement of syndrome rounds.
    """
    b0, b1 = input_bits
    if b0 not in (0, 1) or b1 not in (0, 1):
        raise ValueError(f"input bits must be 0/1, got {input_bits!r}")
    if round_blocks is None:
        round_blocks = round_blocks_for(rounds)
    elif len(round_blocks) != rounds:
        raise ValueError("round_blocks length must equal rounds")

    builder = ProgramBuilder()
    physical = [builder.alloc(Register.PHYSICAL) for _ in range(4)]
    registry = AncillaRegistry()

    def block_end(block: Block) -> None:
        builder.anchor()
        if block in round_blocks:
            syndrome_round(builder, physical)

    encode_logical(builder, physical, input_bits)
    block_end(Block.PREPARE)
    logical_rx_pair(builder, theta, registry, physical, input_label=input_bits)
    block_end(Block.LRX)
    logical_rz_pair(builder, theta, registry)
    block_end(Block.LRZ)
    logical_cnot(builder, physical, registry)
    block_end(Block.LCNOT)
    logical_ry_pair(builder, theta, registry, physical)
    block_end(Block.LRY)

    return LogicalVqc(builder.build(), tuple(physical), registry,
                      (b0, b1), theta, rounds)


# -- trajectory execution ----------------------------------------------------

@dataclass
class TrajectoryResult:
    """Outcome of one pure-state run of a (possibly noise-woven) program.

    ``accepted`` reflects the syndrome record: every measured bit was 0.
    In exact-postselection mode the all-zero branch is projected out
    instead of sampled and ``acceptance_prob`` carries its weight; a
    rejected sampled trajectory stops early and has no final state.
    """

    syndromes: list[SyndromeOutcome]
    accepted: bool
    acceptance_prob: float
    state: Statevector | None
    positions: dict[int, int] | None

    def register_positions(self, program: CircuitProgram,
                           register: Register) -> list[int]:
        return [self.positions[q.index] for q in program.qubit_table
                if q.register is register and q.index in self.positions]


_PAULI_FOR_KIND = {
    "PAULI_ERROR_X": engine.X,
    "PAULI_ERROR_Y": engine.Y,
    "PAULI_ERROR_Z": engine.Z,
}


def run_trajectory(program: CircuitProgram,
                   rng: np.random.Generator | None = None,
                   exact_postselect: bool = False,
                   stop_on_reject: bool = True) -> TrajectoryResult:
    """Execute a program as one trajectory.

    Sampled mode (default) draws each syndrome bit by the Born rule and, if
    ``stop_on_reject``, abandons the trajectory at the first nonzero bit.
    Exact mode projects every syndrome qubit onto 0 and accumulates the
    branch probability instead of sampling (no rng needed when the program
    carries no sampling sites).
    """
    births: dict[int, list[QubitIndex]] = {}
    for q, born in zip(program.qubit_table, program.births):
        births.setdefault(born, []).append(q)

    state = Statevector(0)
    positions: dict[int, int] = {}

    def allocate_up_to(position: int) -> None:
        for q in births.pop(position, ()):
            positions[q.index] = state.allocate(0)

    def drop(q: QubitIndex, bit: int) -> None:
        pos = positions.pop(q.index)
        state.deallocate(pos, bit)
        for key, value in positions.items():
            if value > pos:
                positions[key] = value - 1

    syndromes: list[SyndromeOutcome] = []
    pending_x: int | None = None
    acceptance_prob = 1.0

    ops = program.ops
    for i in range(len(ops) + 1):
        allocate_up_to(i)
        if i == len(ops):
            break
        op = ops[i]
        kind = op.kind
        if kind == "SYNDROME_MEASURE":
            q = op.qubits[0]
            pos = positions[q.index]
            if exact_postselect:
                p0 = state.prob_of_bit(pos, 0)
                if p0 < engine.COLLAPSE_TOL:
                    return TrajectoryResult(syndromes, False, 0.0, None, None)
                state.project(pos, 0)
                acceptance_prob *= p0
                bit = 0
            else:
                bit = state.measure(pos, rng)
            drop(q, bit)
            if pending_x is None:
                pending_x = bit
            else:
                syndromes.append(SyndromeOutcome(len(syndromes), pending_x, bit))
                pending_x = None
            if bit and not exact_postselect and stop_on_reject:
                if pending_x is not None:
                    syndromes.append(
                        SyndromeOutcome(len(syndromes), pending_x, -1))
                return TrajectoryResult(syndromes, False, 0.0, None, None)
            continue

        qubits = [positions[q.index] for q in op.qubits]
        if kind == "CNOT":
            state.apply_cnot(qubits[0], qubits[1])
        elif kind == "SWAP":
            state.apply_swap(qubits[0], qubits[1])
        elif kind == "X":
            state.apply_1q(qubits[0], engine.X)
        elif kind == "H":
            state.apply_1q(qubits[0], engine.H)
        elif kind == "RX":
            state.apply_1q(qubits[0], engine.rx(op.angle))
        elif kind == "RY":
            state.apply_1q(qubits[0], engine.ry(op.angle))
        elif kind == "RZ":
            state.apply_1q(qubits[0], engine.rz(op.angle))
        elif kind in _PAULI_FOR_KIND:
            state.apply_1q(qubits[0], _PAULI_FOR_KIND[kind])
        else:
            raise ValueError(f"executor cannot handle op kind {kind!r}")

    accepted = all(s.clean for s in syndromes)
    return TrajectoryResult(syndromes, accepted, acceptance_prob,
                            state, positions)


def physical_probabilities(result: TrajectoryResult,
                           num_physical: int) -> np.ndarray:
    """Readout distribution over the physical register of a finished run."""
    order = [result.positions[i] for i in range(num_physical)]
    return result.state.probabilities(order)
