"""Dense pure-state simulation of small qubit registers.

The state is a flat complex array indexed by basis integer; bit ``q`` of the
index is the value of qubit ``q`` (qubit 0 is the least significant bit, and
is written leftmost in all textual I/O).  New qubits are appended at the
highest index so existing indices stay stable while ancillas are allocated.

All gate kernels operate in place on the amplitude array via reshaped views;
a state is owned by exactly one trajectory and is never shared between
workers.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

# Tolerances are fixed here; tests may construct looser checks but the
# engine itself always validates against these.
NORM_TOL = 1e-9
UNITARY_TOL = 1e-12
COLLAPSE_TOL = 1e-15

DEFAULT_QUBIT_BUDGET = 22


class EngineError(ValueError):
    """Invalid operation on a statevector (bad index, non-unitary, ...)."""


class QubitBudgetError(EngineError):
    """Allocation would exceed the configured maximum qubit count."""


class DegenerateProjectionError(EngineError):
    """Projection onto an outcome whose probability is numerically zero."""


def _pos(q) -> int:
    """Accept either a plain int position or an object with an ``.index``."""
    return getattr(q, "index", q)


class Statevector:
    """Dense amplitude vector over ``num_qubits`` qubits.

    Mutating operations (gates, measurement, allocation) act in place.
    """

    __slots__ = ("num_qubits", "amps", "max_qubits")

    def __init__(self, num_qubits: int, amps: np.ndarray | None = None,
                 max_qubits: int = DEFAULT_QUBIT_BUDGET):
        if num_qubits < 0 or num_qubits > max_qubits:
            raise QubitBudgetError(
                f"num_qubits={num_qubits} outside [0, {max_qubits}]")
        self.num_qubits = num_qubits
        self.max_qubits = max_qubits
        if amps is None:
            amps = np.zeros(1 << num_qubits, dtype=np.complex128)
            amps[0] = 1.0
        else:
            amps = np.asarray(amps, dtype=np.complex128)
            if amps.shape != (1 << num_qubits,):
                raise EngineError(
                    f"amplitude array has length {amps.shape}, expected "
                    f"{1 << num_qubits}")
        self.amps = amps

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_bits(cls, bits: Sequence[int], max_qubits: int = DEFAULT_QUBIT_BUDGET
                  ) -> "Statevector":
        """Computational basis state; ``bits[q]`` is the value of qubit q."""
        state = cls(len(bits), max_qubits=max_qubits)
        index = 0
        for q, b in enumerate(bits):
            if b not in (0, 1):
                raise EngineError(f"bit value {b!r} is not 0 or 1")
            index |= b << q
        state.amps[0] = 0.0
        state.amps[index] = 1.0
        return state

    def copy(self) -> "Statevector":
        return Statevector(self.num_qubits, self.amps.copy(),
                           max_qubits=self.max_qubits)

    # -- basic queries ----------------------------------------------------

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def _check_qubit(self, q: int) -> int:
        if not 0 <= q < self.num_qubits:
            raise EngineError(
                f"qubit {q} out of range for {self.num_qubits}-qubit state")
        return q

    # -- gate application -------------------------------------------------

    def apply_1q(self, q, gate: np.ndarray) -> None:
        """Apply a 2x2 unitary to qubit ``q`` (validated to UNITARY_TOL)."""
        q = self._check_qubit(_pos(q))
        gate = np.asarray(gate, dtype=np.complex128)
        if gate.shape != (2, 2):
            raise EngineError(f"single-qubit gate must be 2x2, got {gate.shape}")
        if np.max(np.abs(gate.conj().T @ gate - np.eye(2))) > UNITARY_TOL:
            raise EngineError("gate is not unitary within 1e-12")
        view = self.amps.reshape(-1, 2, 1 << q)
        a0 = view[:, 0, :].copy()
        a1 = view[:, 1, :]
        view[:, 0, :] = gate[0, 0] * a0 + gate[0, 1] * a1
        view[:, 1, :] = gate[1, 0] * a0 + gate[1, 1] * a1

    def _two_bit_view(self, hi: int, lo: int) -> np.ndarray:
        """View with axis 1 = bit ``hi`` and axis 3 = bit ``lo`` (hi > lo)."""
        return self.amps.reshape(-1, 2, 1 << (hi - lo - 1), 2, 1 << lo)

    def apply_cnot(self, control, target) -> None:
        c = self._check_qubit(_pos(control))
        t = self._check_qubit(_pos(target))
        if c == t:
            raise EngineError("CNOT control and target must differ")
        hi, lo = max(c, t), min(c, t)
        v = self._two_bit_view(hi, lo)
        if c == hi:
            block0, block1 = v[:, 1, :, 0, :], v[:, 1, :, 1, :]
        else:
            block0, block1 = v[:, 0, :, 1, :], v[:, 1, :, 1, :]
        tmp = block0.copy()
        block0[...] = block1
        block1[...] = tmp

    def apply_swap(self, a, b) -> None:
        a = self._check_qubit(_pos(a))
        b = self._check_qubit(_pos(b))
        if a == b:
            raise EngineError("SWAP qubits must differ")
        hi, lo = max(a, b), min(a, b)
        v = self._two_bit_view(hi, lo)
        tmp = v[:, 0, :, 1, :].copy()
        v[:, 0, :, 1, :] = v[:, 1, :, 0, :]
        v[:, 1, :, 0, :] = tmp

    # -- allocation -------------------------------------------------------

    def allocate(self, initial: int = 0) -> int:
        """Tensor a fresh qubit in |initial> onto the state (highest index).

        Returns the new qubit's index.
        """
        if initial not in (0, 1):
            raise EngineError(f"initial value {initial!r} is not 0 or 1")
        if self.num_qubits + 1 > self.max_qubits:
            raise QubitBudgetError(
                f"allocating qubit {self.num_qubits} exceeds budget of "
                f"{self.max_qubits}")
        zeros = np.zeros_like(self.amps)
        if initial == 0:
            self.amps = np.concatenate([self.amps, zeros])
        else:
            self.amps = np.concatenate([zeros, self.amps])
        new_index = self.num_qubits
        self.num_qubits += 1
        return new_index

    def deallocate(self, q, bit: int) -> None:
        """Remove qubit ``q``, which must hold |bit> exactly (post-collapse).

        Higher-indexed qubits shift down by one.
        """
        q = self._check_qubit(_pos(q))
        view = self.amps.reshape(-1, 2, 1 << q)
        kept = view[:, bit, :]
        dropped = view[:, 1 - bit, :]
        if np.max(np.abs(dropped)) > NORM_TOL:
            raise EngineError(
                f"qubit {q} is not in |{bit}>; cannot deallocate")
        self.amps = kept.reshape(-1).copy()
        self.num_qubits -= 1

    # -- probabilities and measurement ------------------------------------

    def probabilities(self, qubits: Sequence) -> np.ndarray:
        """Marginal Born-rule probabilities over the given qubits.

        Outcome index ``o`` encodes ``qubits[i]`` at bit position ``i``.
        """
        qubits = [self._check_qubit(_pos(q)) for q in qubits]
        if len(set(qubits)) != len(qubits):
            raise EngineError("duplicate qubits in probability query")
        n = self.num_qubits
        p = np.abs(self.amps) ** 2
        # Axis j of the reshaped tensor corresponds to qubit n-1-j.
        tensor = p.reshape((2,) * n) if n else p.reshape(())
        sum_axes = tuple(n - 1 - q for q in range(n) if q not in qubits)
        marg = tensor.sum(axis=sum_axes) if sum_axes else tensor
        # Remaining axes are the kept qubits in descending index order; put
        # qubits[i] at output bit i (axis k-1-i of the result tensor).
        kept_desc = sorted(qubits, reverse=True)
        order = [kept_desc.index(q) for q in reversed(qubits)]
        return np.ascontiguousarray(marg.transpose(order)).reshape(-1)

    def prob_of_bit(self, q, bit: int) -> float:
        q = self._check_qubit(_pos(q))
        view = self.amps.reshape(-1, 2, 1 << q)
        return float(np.sum(np.abs(view[:, bit, :]) ** 2))

    def project(self, q, bit: int) -> float:
        """Project qubit ``q`` onto |bit> and renormalize.

        Returns the pre-projection probability of the outcome.  Raises
        DegenerateProjectionError if that probability is below 1e-15.
        """
        q = self._check_qubit(_pos(q))
        prob = self.prob_of_bit(q, bit)
        if prob < COLLAPSE_TOL:
            raise DegenerateProjectionError(
                f"projection of qubit {q} onto |{bit}> has probability {prob}")
        view = self.amps.reshape(-1, 2, 1 << q)
        view[:, 1 - bit, :] = 0.0
        self.amps /= np.sqrt(prob)
        return prob

    def measure(self, q, rng: np.random.Generator) -> int:
        """Sample a Z-basis outcome for qubit ``q`` and collapse in place."""
        q = self._check_qubit(_pos(q))
        p1 = self.prob_of_bit(q, 1)
        outcome = 1 if rng.random() < p1 else 0
        self.project(q, outcome)
        return outcome

    def sample_outcome(self, qubits: Sequence, rng: np.random.Generator) -> int:
        """Sample one joint outcome over ``qubits`` without collapsing."""
        probs = self.probabilities(qubits)
        u = rng.random()
        return int(np.searchsorted(np.cumsum(probs), u, side="right").clip(
            0, len(probs) - 1))

    # -- overlaps and reductions -------------------------------------------

    def inner_product(self, other: "Statevector") -> complex:
        """<self|other>; squared magnitude is the pure-state fidelity."""
        if self.num_qubits != other.num_qubits:
            raise EngineError(
                f"inner product dimension mismatch: {self.num_qubits} vs "
                f"{other.num_qubits} qubits")
        return complex(np.vdot(self.amps, other.amps))

    def reduced_density(self, keep: Sequence) -> np.ndarray:
        """Reduced density matrix over ``keep`` (row bit i = keep[i])."""
        keep = [self._check_qubit(_pos(q)) for q in keep]
        if len(set(keep)) != len(keep):
            raise EngineError("duplicate qubits in reduced_density")
        n, k = self.num_qubits, len(keep)
        tensor = self.amps.reshape((2,) * n)
        # Move kept qubits to the front so the row index has keep[i] at
        # output bit i, i.e. axis position k-1-i.
        front = [n - 1 - q for q in reversed(keep)]
        rest = [ax for ax in range(n) if ax not in front]
        mat = tensor.transpose(front + rest).reshape(1 << k, -1)
        return mat @ mat.conj().T


# -- gate matrices ---------------------------------------------------------

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)


def rx(theta: float) -> np.ndarray:
    """R_X(theta) = exp(-i theta X / 2)."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-1j * theta / 2), 0],
                     [0, np.exp(1j * theta / 2)]], dtype=np.complex128)


PAULI = {"X": X, "Y": Y, "Z": Z}


def bits_label(outcome: int, width: int) -> str:
    """Render an outcome integer as a bit string with qubit 0 leftmost."""
    return "".join(str((outcome >> i) & 1) for i in range(width))


def label_to_outcome(label: str) -> int:
    """Inverse of bits_label."""
    out = 0
    for i, ch in enumerate(label):
        if ch == "1":
            out |= 1 << i
        elif ch != "0":
            raise EngineError(f"bad bit {ch!r} in label {label!r}")
    return out


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    """Kronecker product, first factor = qubit 0 = least significant bit.

    With our index convention, qubit 0 varies fastest, so it must be the
    *last* factor of a conventional np.kron chain; this helper takes
    matrices in qubit order and reverses internally.
    """
    out = np.eye(1, dtype=np.complex128)
    for m in mats:
        out = np.kron(m, out)
    return out
