"""Ancilla-mediated logical rotations.

Rotation gates cannot act on the four physical qubits directly, so each
rotation layer conscripts fresh ancilla qubits that (a) copy the logical
label, (b) temporarily absorb the label out of the physical register and
all earlier ancillas through CNOT conjugation, (c) receive the rotation,
and (d) undo the conjugation.  After every completed layer each term of the
superposition carries ancillas equal to its logical label (the mirror
property), which is what lets a later layer repeat the trick.

Pair rotations (used by the classifier) allocate two ancillas per layer,
one mirroring each logical bit; the single-qubit variant allocates one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .circuit import Block, GateOp, ProgramBuilder, QubitIndex, Register

# Physical-qubit supports of the two logical X operators: flipping
# {q1,q3} toggles the first logical bit, {q2,q3} the second.
LOGICAL_X_SUPPORT = ((1, 3), (2, 3))

_BLOCK_FOR_KIND = {"RX": Block.LRX, "RZ": Block.LRZ, "RY": Block.LRY}


class RegistryError(ValueError):
    """Ancilla registry is in a state the requested fragment cannot use."""


@dataclass
class AncillaRegistry:
    """Rotation ancillas grouped by the logical bit they mirror.

    ``by_logical[0]`` holds ancillas mirroring the first logical bit
    (oldest first), ``by_logical[1]`` the second.  Pair layers append one
    qubit to each list, so during classifier execution the total count n
    stays in {0, 2, 4, 6}.
    """

    by_logical: tuple[list[QubitIndex], list[QubitIndex]] = field(
        default_factory=lambda: ([], []))

    @property
    def count(self) -> int:
        return len(self.by_logical[0]) + len(self.by_logical[1])

    @property
    def pairs(self) -> list[tuple[QubitIndex, QubitIndex]]:
        first, second = self.by_logical
        if len(first) != len(second):
            raise RegistryError(
                f"registry is not pair-structured ({len(first)} vs "
                f"{len(second)} ancillas)")
        return list(zip(first, second))

    def all_ancillas(self) -> list[QubitIndex]:
        ordered = sorted(self.by_logical[0] + self.by_logical[1],
                         key=lambda q: q.index)
        return ordered

    def cnot_fixup_pairs(self) -> list[tuple[QubitIndex, QubitIndex]]:
        """Control/target pairs restoring the mirror after a logical CNOT.

        The logical CNOT maps (b0, b1) to (b0, b0 xor b1); every ancilla
        mirroring b1 must be flipped conditioned on one mirroring b0.
        """
        if not self.by_logical[1]:
            return []
        if not self.by_logical[0]:
            raise RegistryError(
                "cannot fix up second-bit ancillas without a first-bit ancilla")
        return self.pairs


def _copy_or_init(builder: ProgramBuilder, new: QubitIndex,
                  previous: QubitIndex | None, label_bit: int | None) -> None:
    """Step 1: bring a fresh |0> ancilla up to the current label bit.

    The very first layer knows the label classically (basis encoding), so
    a plain X suffices; later layers copy from the previous layer's
    ancilla with a CNOT.
    """
    if previous is not None:
        builder.add("CNOT", previous, new)
    elif label_bit:
        builder.add("X", new)


def _conjugated_rotation(builder: ProgramBuilder, kind: str, theta: float,
                         registry: AncillaRegistry,
                         physical: list[QubitIndex],
                         roles: tuple[int, ...],
                         label_bits: tuple[int, ...] | None) -> list[GateOp]:
    """Shared body of the RX/RY (and single-qubit) conjugation layers.

    ``roles`` lists the logical bits receiving new ancillas (one entry per
    new ancilla).  The conjugation block applies, per new ancilla, CNOTs
    onto that logical bit's physical support and then onto every earlier
    ancilla of the same role; the whole block is replayed in reverse after
    the rotation.
    """
    start = builder.position
    new_ancillas: list[QubitIndex] = []
    for i, role in enumerate(roles):
        earlier = registry.by_logical[role]
        anc = builder.alloc(Register.ROTATION_ANCILLA)
        _copy_or_init(builder, anc,
                      earlier[-1] if earlier else None,
                      None if earlier else label_bits[i])
        new_ancillas.append(anc)

    conj: list[tuple[QubitIndex, QubitIndex]] = []
    for anc, role in zip(new_ancillas, roles):
        for target in LOGICAL_X_SUPPORT[role]:
            conj.append((anc, physical[target]))
    for anc, role in zip(new_ancillas, roles):
        for earlier in registry.by_logical[role]:
            conj.append((anc, earlier))

    for control, target in conj:
        builder.add("CNOT", control, target)
    for anc in new_ancillas:
        builder.add(kind, anc, angle=theta)
    for control, target in reversed(conj):
        builder.add("CNOT", control, target)

    for anc, role in zip(new_ancillas, roles):
        registry.by_logical[role].append(anc)
    return builder.ops[start:]


def logical_rx_pair(builder: ProgramBuilder, theta: float,
                    registry: AncillaRegistry, physical: list[QubitIndex],
                    input_label: tuple[int, int] | None = None) -> list[GateOp]:
    """Logical RX(theta) on both logical qubits via one fresh ancilla pair.

    When the registry is empty the new ancillas are initialised to the
    circuit's classical input label; ``input_label`` is required then.
    """
    if len(registry.by_logical[0]) != len(registry.by_logical[1]):
        raise RegistryError("registry must hold complete pairs before RX")
    if registry.count == 0 and input_label is None:
        raise RegistryError("first rotation layer needs the input label")
    builder.set_block(Block.LRX)
    return _conjugated_rotation(builder, "RX", theta, registry, physical,
                                roles=(0, 1), label_bits=input_label)


def logical_rz_pair(builder: ProgramBuilder, theta: float,
                    registry: AncillaRegistry) -> list[GateOp]:
    """Logical RZ(theta) pair: copy the previous pair, rotate, done.

    RZ is diagonal, so the per-label phase lands correctly without any
    physical-qubit conjugation.
    """
    if registry.count == 0:
        raise RegistryError("RZ layer requires an existing ancilla pair")
    pairs = registry.pairs
    previous = pairs[-1]
    builder.set_block(Block.LRZ)
    start = builder.position
    new_pair = []
    for prev in previous:
        anc = builder.alloc(Register.ROTATION_ANCILLA)
        builder.add("CNOT", prev, anc)
        new_pair.append(anc)
    for anc in new_pair:
        builder.add("RZ", anc, angle=theta)
    registry.by_logical[0].append(new_pair[0])
    registry.by_logical[1].append(new_pair[1])
    return builder.ops[start:]


def logical_ry_pair(builder: ProgramBuilder, theta: float,
                    registry: AncillaRegistry,
                    physical: list[QubitIndex]) -> list[GateOp]:
    """Logical RY(theta) pair; needs two prior pairs to back-propagate onto."""
    if len(registry.pairs) < 2:
        raise RegistryError("RY layer requires at least two prior pairs")
    builder.set_block(Block.LRY)
    return _conjugated_rotation(builder, "RY", theta, registry, physical,
                                roles=(0, 1), label_bits=None)


def logical_rotation_single(builder: ProgramBuilder, kind: str, theta: float,
                            logical_qubit: int, registry: AncillaRegistry,
                            physical: list[QubitIndex],
                            label_bit: int | None = None) -> list[GateOp]:
    """Single-logical-qubit rotation: the pair scheme with one ancilla.

    Not used by the classifier circuit; exercised by the mirror and
    equivalence properties only.
    """
    if logical_qubit not in (0, 1):
        raise RegistryError(f"logical qubit must be 0 or 1, got {logical_qubit}")
    if kind not in _BLOCK_FOR_KIND:
        raise RegistryError(f"unsupported rotation kind {kind!r}")
    earlier = registry.by_logical[logical_qubit]
    if not earlier and label_bit is None:
        raise RegistryError("first rotation on this logical qubit needs its "
                            "classical label bit")
    builder.set_block(_BLOCK_FOR_KIND[kind])
    if kind == "RZ":
        start = builder.position
        anc = builder.alloc(Register.ROTATION_ANCILLA)
        _copy_or_init(builder, anc, earlier[-1] if earlier else None, label_bit)
        builder.add("RZ", anc, angle=theta)
        registry.by_logical[logical_qubit].append(anc)
        return builder.ops[start:]
    return _conjugated_rotation(builder, kind, theta, registry, physical,
                                roles=(logical_qubit,),
                                label_bits=(label_bit,))
