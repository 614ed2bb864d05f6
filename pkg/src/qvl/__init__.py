"""Logically encoded parity classifier: simulation and training harness."""

__version__ = "0.1.0"

from .circuit import (Block, CircuitProgram, GateOp, ProgramBuilder,
                      QubitIndex, Register, build_bare_vqc, count_gates)
from .code422 import (SyndromeOutcome, codeword_statevector,
                      decode_logical_readout, encode_logical, logical_cnot,
                      mirror_invariant_holds, syndrome_round)
from .engine import Statevector
from .noise import (FaultRecord, NoiseConfig, NoiseModel, NoisePlan,
                    StreamKey, sample_pauli, weave_environmental_noise,
                    weave_gate_noise)
from .rotations import (AncillaRegistry, logical_rx_pair, logical_ry_pair,
                        logical_rz_pair)
from .vqc import (LogicalVqc, TrajectoryResult, build_logical_vqc,
                  physical_probabilities, run_trajectory)

__all__ = [
    "AncillaRegistry", "Block", "CircuitProgram", "FaultRecord", "GateOp",
    "LogicalVqc", "NoiseConfig", "NoiseModel", "NoisePlan", "ProgramBuilder",
    "QubitIndex", "Register", "Statevector", "StreamKey", "SyndromeOutcome",
    "TrajectoryResult", "build_bare_vqc", "build_logical_vqc",
    "codeword_statevector", "count_gates", "decode_logical_readout",
    "encode_logical", "logical_cnot", "logical_rx_pair", "logical_ry_pair",
    "logical_rz_pair", "mirror_invariant_holds", "physical_probabilities",
    "run_trajectory", "sample_pauli", "syndrome_round",
    "weave_environmental_noise", "weave_gate_noise",
]
