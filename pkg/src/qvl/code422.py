"""The [[4,2,2]] error-detecting code.

Two logical qubits live in four physical qubits; the weight-4 stabilisers
XXXX and ZZZZ detect (but cannot correct) any single-qubit Pauli error.
Codeword mapping, with qubit 0 leftmost:

    00 -> (|0000> + |1111>)/sqrt(2)      01 -> (|0011> + |1100>)/sqrt(2)
    10 -> (|0101> + |1010>)/sqrt(2)      11 -> (|0110> + |1001>)/sqrt(2)

X on {q1,q3} flips the first logical bit, X on {q0,q1} flips the second,
and SWAP(q0,q1) acts as the logical CNOT (control = first logical qubit).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Block, GateOp, ProgramBuilder, QubitIndex, Register
from .engine import Statevector

LABELS: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))

# Outcome integers over (q0..q3) with qubit i at bit i.
CODEWORD_OUTCOMES: dict[tuple[int, int], tuple[int, int]] = {
    (0, 0): (0b0000, 0b1111),
    (0, 1): (0b1100, 0b0011),   # labels 0011 / 1100 with q0 leftmost
    (1, 0): (0b1010, 0b0101),   # 0101 / 1010
    (1, 1): (0b0110, 0b1001),   # 0110 / 1001
}

CODEWORD_MASS_TOL = 1e-12


class DecodeError(ValueError):
    """Readout distribution has no support on the codespace."""


def codeword_statevector(label: tuple[int, int]) -> np.ndarray:
    """Analytic 16-amplitude vector for one logical basis label."""
    amps = np.zeros(16, dtype=np.complex128)
    for outcome in CODEWORD_OUTCOMES[label]:
        amps[outcome] = 1 / np.sqrt(2)
    return amps


def encode_logical(builder: ProgramBuilder, physical: list[QubitIndex],
                   label: tuple[int, int]) -> list[GateOp]:
    """Append the codeword-preparation fragment for ``label``.

    H on q0 and a CNOT fan-out build the 00 codeword; X fix-ups on
    {q1,q3} / {q0,q1} then set the first / second logical bit.
    """
    q0, q1, q2, q3 = physical
    builder.set_block(Block.PREPARE)
    start = builder.position
    builder.add("H", q0)
    builder.add("CNOT", q0, q1)
    builder.add("CNOT", q0, q2)
    builder.add("CNOT", q0, q3)
    b0, b1 = label
    if b0:
        builder.add("X", q1)
        builder.add("X", q3)
    if b1:
        builder.add("X", q0)
        builder.add("X", q1)
    return builder.ops[start:]


def logical_cnot(builder: ProgramBuilder, physical: list[QubitIndex],
                 registry) -> list[GateOp]:
    """SWAP(q0,q1) plus the ancilla fix-ups that restore label mirroring.

    The SWAP maps logical (b0,b1) to (b0, b0 xor b1); every ancilla that
    mirrors the second logical bit must then be flipped conditioned on the
    first.  Within each pair that is a CNOT from the pair's first member
    onto its second.
    """
    builder.set_block(Block.LCNOT)
    start = builder.position
    builder.add("SWAP", physical[0], physical[1])
    for a_first, a_second in registry.cnot_fixup_pairs():
        builder.add("CNOT", a_first, a_second)
    return builder.ops[start:]


@dataclass(frozen=True)
class SyndromeOutcome:
    round_index: int
    x_stabiliser_bit: int
    z_stabiliser_bit: int

    @property
    def clean(self) -> bool:
        return self.x_stabiliser_bit == 0 and self.z_stabiliser_bit == 0


def syndrome_round(builder: ProgramBuilder, physical: list[QubitIndex]
                   ) -> list[GateOp]:
    """Append one detection round on two fresh syndrome qubits.

    XXXX is read through an ancilla in the |+> basis (H, controlled-X onto
    every physical qubit, H, measure); ZZZZ accumulates bit parity through
    CNOTs onto the second ancilla.  Syndrome qubits are never reused.
    """
    start = builder.position
    sx = builder.alloc(Register.SYNDROME)
    sz = builder.alloc(Register.SYNDROME)
    builder.add("H", sx)
    for q in physical:
        builder.add("CNOT", sx, q)
    builder.add("H", sx)
    builder.add("SYNDROME_MEASURE", sx)
    for q in physical:
        builder.add("CNOT", q, sz)
    builder.add("SYNDROME_MEASURE", sz)
    return builder.ops[start:]


def decode_logical_readout(probs16: np.ndarray
                           ) -> tuple[np.ndarray, float]:
    """Fold a 16-outcome physical distribution onto the 4 logical labels.

    Mass outside the eight codeword states is dropped and the remainder
    renormalized (detection-only code; leaked mass carries no label).
    Returns (label probabilities in LABELS order, <Z> of the first logical
    qubit).
    """
    probs16 = np.asarray(probs16, dtype=float)
    if probs16.shape != (16,):
        raise ValueError(f"expected 16 outcome probabilities, got {probs16.shape}")
    if abs(probs16.sum() - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {probs16.sum()}, not 1")
    label_mass = np.array([
        probs16[CODEWORD_OUTCOMES[label][0]] + probs16[CODEWORD_OUTCOMES[label][1]]
        for label in LABELS
    ])
    total = label_mass.sum()
    if total < CODEWORD_MASS_TOL:
        raise DecodeError(
            f"codeword mass {total} below {CODEWORD_MASS_TOL}; undecodable")
    label_probs = label_mass / total
    expectation = float(label_probs[0] + label_probs[1]
                        - label_probs[2] - label_probs[3])
    return label_probs, expectation


_OUTCOME_TO_LABEL = {
    outcome: label
    for label, outcomes in CODEWORD_OUTCOMES.items()
    for outcome in outcomes
}


def mirror_invariant_holds(state: Statevector, registry,
                           positions: dict[int, int] | None = None,
                           amp_tol: float = 1e-10) -> bool:
    """Check that every superposition term's ancillas copy its logical label.

    ``positions`` maps program qubit index to state position (identity when
    the state still holds every program qubit).  Vacuously true with no
    ancillas; false as soon as any nonzero-amplitude term has a physical
    part off the codespace or an ancilla bit differing from the label bit
    it mirrors.
    """
    def pos(q: QubitIndex) -> int:
        return positions[q.index] if positions is not None else q.index

    anc = [(pos(a), bit_role) for bit_role, members in
           enumerate(registry.by_logical) for a in members]
    phys_pos = [pos(QubitIndex(i, Register.PHYSICAL)) for i in range(4)]
    nonzero = np.nonzero(np.abs(state.amps) > amp_tol)[0]
    for index in nonzero:
        outcome = 0
        for i, p in enumerate(phys_pos):
            outcome |= ((index >> p) & 1) << i
        label = _OUTCOME_TO_LABEL.get(outcome)
        if label is None:
            return False
        for position, bit_role in anc:
            if (index >> position) & 1 != label[bit_role]:
                return False
    return True
