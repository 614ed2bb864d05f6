"""State-fidelity analytics and threshold estimation.

Per-shot fidelities are taken at the pre-measurement point (after the last
syndrome round, before readout) against the noise-free state of the same
circuit.  Full-state fidelity is the pure-state overlap squared; the
physical and rotation-ancilla registers are entangled with each other, so
register fidelities use the mixed-state fidelity of reduced density
matrices, which reduces to the overlap form when both reductions are pure.
All reported values are absolute.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import CircuitProgram, Register
from .engine import Statevector

HISTOGRAM_BINS = np.linspace(0.0, 1.0, 51)   # 50 bins of width 0.02


class FidelityLayoutError(ValueError):
    pass


class InconclusiveSweepError(RuntimeError):
    """The sweep does not bracket a threshold."""


@dataclass(frozen=True)
class FidelityRecord:
    input_label: tuple[int, int]
    F_full: float
    F_phys: float
    F_anc: float
    accepted: bool

    def __post_init__(self):
        for name in ("F_full", "F_phys", "F_anc"):
            value = getattr(self, name)
            if not -1e-9 <= value <= 1 + 1e-9:
                raise ValueError(f"{name}={value} outside [0, 1]")


def pure_fidelity(a: Statevector, b: Statevector) -> float:
    """|<a|b>|^2, clipped into [0, 1]."""
    return float(min(abs(a.inner_product(b)) ** 2, 1.0))


def mixed_state_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 via the spectrum of rho@sigma.

    rho @ sigma shares its nonzero spectrum with the PSD matrix inside the
    trace, so the fidelity is (sum of sqrt eigenvalues)^2; tiny negative or
    imaginary parts from roundoff are clipped.
    """
    eigs = np.linalg.eigvals(rho @ sigma)
    roots = np.sqrt(np.clip(eigs.real, 0.0, None))
    return float(min(roots.sum() ** 2, 1.0))


def record_fidelity(noisy: Statevector, ideal: Statevector,
                    physical: Sequence[int], ancilla: Sequence[int],
                    input_label: tuple[int, int],
                    accepted: bool = True) -> FidelityRecord:
    """Fidelities of a noisy pre-measurement state against its ideal twin."""
    if noisy.num_qubits != ideal.num_qubits:
        raise FidelityLayoutError(
            f"layout mismatch: {noisy.num_qubits} vs {ideal.num_qubits} qubits")
    f_full = pure_fidelity(noisy, ideal)
    f_phys = mixed_state_fidelity(noisy.reduced_density(physical),
                                  ideal.reduced_density(physical))
    if ancilla:
        f_anc = mixed_state_fidelity(noisy.reduced_density(ancilla),
                                     ideal.reduced_density(ancilla))
    else:
        f_anc = 1.0
    return FidelityRecord(tuple(input_label), f_full, f_phys, f_anc, accepted)


def record_fidelity_from_results(noisy_result, ideal_result,
                                 program: CircuitProgram,
                                 input_label: tuple[int, int]
                                 ) -> FidelityRecord:
    """Convenience wrapper taking two finished TrajectoryResults."""
    if noisy_result.positions != ideal_result.positions:
        raise FidelityLayoutError("trajectory layouts differ")
    phys = noisy_result.register_positions(program, Register.PHYSICAL)
    anc = noisy_result.register_positions(program, Register.ROTATION_ANCILLA)
    return record_fidelity(noisy_result.state, ideal_result.state, phys, anc,
                           input_label, accepted=noisy_result.accepted)


@dataclass(frozen=True)
class FidelitySummary:
    count: int
    mean: float
    std: float
    frac_below_002: float
    frac_above_098: float
    histogram: tuple[int, ...]

    def __post_init__(self):
        if sum(self.histogram) != self.count:
            raise ValueError("histogram counts must sum to the sample count")


def summarize_fidelities(values: Sequence[float]) -> FidelitySummary:
    arr = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    if arr.size == 0:
        raise ValueError("no fidelity values to summarize")
    hist, _ = np.histogram(arr, bins=HISTOGRAM_BINS)
    return FidelitySummary(
        count=int(arr.size),
        mean=float(arr.mean()),
        std=float(arr.std()),
        frac_below_002=float(np.mean(arr < 0.02)),
        frac_above_098=float(np.mean(arr > 0.98)),
        histogram=tuple(int(c) for c in hist),
    )


REGISTER_FIELDS = {"full": "F_full", "phys": "F_phys", "anc": "F_anc"}


def summarize_records(records: Sequence[FidelityRecord]
                      ) -> dict[str, FidelitySummary]:
    return {
        key: summarize_fidelities([getattr(r, attr) for r in records])
        for key, attr in REGISTER_FIELDS.items()
    }


def fidelity_campaign(noise, rounds: int, theta: float,
                      stream, shots_per_label: int = 1000,
                      max_reruns: int = 1000,
                      ) -> tuple[list[FidelityRecord], dict[str, FidelitySummary]]:
    """Accepted-shot fidelity samples for all four input labels.

    Runs ``shots_per_label`` accepted shots per label (the paper-scale
    default gives 4000 records) and aggregates per-register summaries.
    """
    from .training import ShotPolicy, estimate_expectation  # cycle break

    policy = ShotPolicy(shots=shots_per_label, mode="per_shot",
                        max_reruns=max_reruns)
    records: list[FidelityRecord] = []
    for i, label in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        est = estimate_expectation(
            label, theta, encoded=True, rounds=rounds, noise=noise,
            policy=policy, stream=stream.child(i), collect_fidelity=True)
        records.extend(est.fidelity_records)
    return records, summarize_records(records)


# -- threshold estimation ----------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    p_anc: float
    mean_final_accuracy: float
    std: float
    rounds: int | None = None


@dataclass(frozen=True)
class ThresholdReport:
    threshold_p_anc: float
    threshold_f_anc: float | None
    qualifying: tuple[float, ...]
    failing: tuple[float, ...]


def estimate_threshold(sweep: Sequence[SweepPoint],
                       accuracy_floor: float = 0.90,
                       std_ceiling: float = 0.05,
                       fidelity_rows: Sequence[tuple[float, int, float]] | None = None,
                       fidelity_rounds: Sequence[int] = (1, 2, 3, 5),
                       ) -> ThresholdReport:
    """Largest ancilla error rate at which detection still trains reliably.

    A p_anc qualifies when every sweep point at that rate (detection rounds
    >= 1 when round counts are present) keeps its plateau mean final
    accuracy at or above ``accuracy_floor`` with across-seed std at most
    ``std_ceiling``.  The sweep must bracket the answer: at least one rate
    above the threshold has to fail, otherwise the grid is too coarse to
    conclude anything.

    The matching ancilla fidelity is the mean of the supplied
    (p_anc, rounds, F_anc) rows at the threshold rate over
    ``fidelity_rounds``.
    """
    relevant = [p for p in sweep if p.rounds is None or p.rounds >= 1]
    if not relevant:
        raise InconclusiveSweepError("sweep has no detection-round points")
    by_rate: dict[float, list[SweepPoint]] = {}
    for point in relevant:
        by_rate.setdefault(point.p_anc, []).append(point)

    qualifying, failing = [], []
    for rate in sorted(by_rate):
        points = by_rate[rate]
        ok = all(p.mean_final_accuracy >= accuracy_floor
                 and p.std <= std_ceiling for p in points)
        (qualifying if ok else failing).append(rate)

    if not qualifying:
        raise InconclusiveSweepError(
            f"no p_anc meets accuracy >= {accuracy_floor} with "
            f"std <= {std_ceiling}")
    threshold = max(qualifying)
    if not any(rate > threshold for rate in failing):
        raise InconclusiveSweepError(
            "sweep too coarse: no failing p_anc above the candidate "
            f"threshold {threshold}")

    f_anc = None
    if fidelity_rows is not None:
        wanted = set(fidelity_rounds)
        matches = [f for (rate, rounds, f) in fidelity_rows
                   if abs(rate - threshold) < 1e-12 and rounds in wanted]
        if matches:
            f_anc = float(np.mean(matches))
    return ThresholdReport(threshold, f_anc, tuple(qualifying), tuple(failing))
