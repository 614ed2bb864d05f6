"""Stochastic Pauli fault injection.

Two models:

* gate noise — after every gate, each non-syndrome operand suffers X, Y or
  Z with probability r (its register's Pauli Error Rate), doubled for the
  operands of 2-qubit gates;
* environmental noise — after every ``injection_period``-th gate on the
  gate clock, every currently-allocated physical and rotation-ancilla
  qubit suffers X, Y or Z at its register's rate simultaneously.

Rotation ancillas run at ``f_anc`` times the physical rate; syndrome
qubits are always noise-free.  Weaving is a pure function of
(program, config, stream), so trajectories may run on any number of
workers in any order without changing results.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .circuit import (CircuitProgram, GateOp, QubitIndex, Register,
                      TWO_QUBIT_KINDS)

PAULIS = ("X", "Y", "Z")
_ERROR_KIND = {"X": "PAULI_ERROR_X", "Y": "PAULI_ERROR_Y", "Z": "PAULI_ERROR_Z"}


class NoiseModel(str, Enum):
    NONE = "none"
    GATE = "gate"
    ENVIRONMENTAL = "environmental"


class NoiseConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseConfig:
    model: NoiseModel = NoiseModel.NONE
    p_phys: float = 0.0
    f_anc: float = 1.0
    injection_period: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", NoiseModel(self.model))
        if not 0.0 <= self.p_phys <= 1.0:
            raise NoiseConfigError(f"p_phys={self.p_phys} outside [0, 1]")
        if self.f_anc < 0.0:
            raise NoiseConfigError(f"f_anc={self.f_anc} must be >= 0")
        if self.p_anc > 1.0:
            raise NoiseConfigError(
                f"p_anc = f_anc * p_phys = {self.p_anc} exceeds 1")
        if self.injection_period < 1:
            raise NoiseConfigError(
                f"injection_period={self.injection_period} must be >= 1")
        if self.model is NoiseModel.GATE and 2 * max(self.p_phys, self.p_anc) > 1.0:
            raise NoiseConfigError(
                "doubled two-qubit-gate rate exceeds 1; reduce p_phys/f_anc")

    @property
    def p_anc(self) -> float:
        return self.f_anc * self.p_phys

    def rate_for(self, register: Register) -> float:
        if register is Register.PHYSICAL:
            return self.p_phys
        if register is Register.ROTATION_ANCILLA:
            return self.p_anc
        return 0.0


@dataclass(frozen=True)
class FaultRecord:
    """One injected Pauli, attached after op ``position`` of the source program."""

    position: int
    qubit: QubitIndex
    pauli: str

    def __str__(self) -> str:
        return f"after_op={self.position} qubit={self.qubit} pauli={self.pauli}"


def sample_pauli(rate: float, rng: np.random.Generator) -> str:
    """Draw I with probability 1-rate, otherwise X, Y, Z equiprobably."""
    if not 0.0 <= rate <= 1.0:
        raise NoiseConfigError(f"rate={rate} outside [0, 1]")
    u = rng.random()
    if u >= rate:
        return "I"
    return PAULIS[min(int(3 * u / rate), 2)]


class NoisePlan:
    """Precomputed fault sites for one (program, config) pair.

    Site order is the determinism contract: (op order, operand order) for
    gate noise, (injection site, qubit index) for environmental noise.
    One uniform draw per site reproduces sample_pauli's distribution.
    """

    def __init__(self, program: CircuitProgram, config: NoiseConfig):
        self.program = program
        self.config = config
        sites: list[tuple[int, QubitIndex, float]] = []
        if config.model is NoiseModel.GATE:
            for i, op in enumerate(program.ops):
                if not op.counts_as_gate:
                    continue
                double = 2.0 if op.kind in TWO_QUBIT_KINDS else 1.0
                for q in op.qubits:
                    rate = double * config.rate_for(q.register)
                    if rate > 0.0:
                        sites.append((i, q, rate))
        elif config.model is NoiseModel.ENVIRONMENTAL:
            noisy_qubits = [
                (q, born) for q, born in zip(program.qubit_table, program.births)
                if q.register is not Register.SYNDROME
                and config.rate_for(q.register) > 0.0
            ]
            clock = 0
            for i, op in enumerate(program.ops):
                if not op.counts_as_gate:
                    continue
                clock += 1
                if clock % config.injection_period == 0:
                    for q, born in noisy_qubits:
                        if born <= i:
                            sites.append((i, q, config.rate_for(q.register)))
        self.sites = sites
        self.rates = np.array([s[2] for s in sites], dtype=float)

    @property
    def expected_fault_count(self) -> float:
        return float(self.rates.sum())

    def sample_faults(self, rng: np.random.Generator) -> list[FaultRecord]:
        n = len(self.sites)
        if n == 0:
            return []
        u = rng.random(n)
        hits = np.nonzero(u < self.rates)[0]
        faults = []
        for k in hits:
            position, qubit, rate = self.sites[k]
            pauli = PAULIS[min(int(3 * u[k] / rate), 2)]
            faults.append(FaultRecord(position, qubit, pauli))
        return faults

    def apply_faults(self, faults: list[FaultRecord]) -> CircuitProgram:
        """Insert fault ops into the program; no faults returns it unchanged."""
        if not faults:
            return self.program
        by_position: dict[int, list[FaultRecord]] = {}
        for f in faults:
            by_position.setdefault(f.position, []).append(f)
        src = self.program
        new_ops: list[GateOp] = []
        new_index: list[int] = []          # original position -> new position
        for i, op in enumerate(src.ops):
            new_index.append(len(new_ops))
            new_ops.append(op)
            for f in by_position.get(i, ()):
                new_ops.append(GateOp(_ERROR_KIND[f.pauli], (f.qubit,),
                                      block_tag=op.block_tag))
        new_index.append(len(new_ops))
        births = tuple(new_index[b] for b in src.births)
        anchors = tuple(new_index[a] for a in src.anchors)
        return CircuitProgram(tuple(new_ops), src.qubit_table, births, anchors)

    def weave(self, rng: np.random.Generator
              ) -> tuple[CircuitProgram, list[FaultRecord]]:
        faults = self.sample_faults(rng)
        return self.apply_faults(faults), faults


def weave_gate_noise(program: CircuitProgram, config: NoiseConfig,
                     rng: np.random.Generator
                     ) -> tuple[CircuitProgram, list[FaultRecord]]:
    if config.model is not NoiseModel.GATE:
        raise NoiseConfigError("weave_gate_noise requires model=gate")
    return NoisePlan(program, config).weave(rng)


def weave_environmental_noise(program: CircuitProgram, config: NoiseConfig,
                              rng: np.random.Generator
                              ) -> tuple[CircuitProgram, list[FaultRecord]]:
    if config.model is not NoiseModel.ENVIRONMENTAL:
        raise NoiseConfigError(
            "weave_environmental_noise requires model=environmental")
    return NoisePlan(program, config).weave(rng)


def export_faults(faults: list[FaultRecord]) -> str:
    """Audit text, one fault per line."""
    return "".join(f"{f}\n" for f in faults)


# -- deterministic stream derivation ----------------------------------------

@dataclass(frozen=True)
class StreamKey:
    """Splittable counter-based random stream address.

    ``child(*steps)`` extends the spawn path; ``generator()`` yields a
    Philox generator determined entirely by (seed, path), independent of
    worker scheduling.
    """

    seed: int
    path: tuple[int, ...] = ()

    def child(self, *steps: int) -> "StreamKey":
        return StreamKey(self.seed, self.path + steps)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))
