"""Parity-classification training loop.

Dataset handling, shot-based expectation estimation with post-selection,
loss/gradient/optimizer steps on the single rotation parameter, and
accuracy tracking for bare and logically encoded circuits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import CircuitProgram, build_bare_vqc
from .code422 import decode_logical_readout
from .fidelity import FidelityRecord, record_fidelity_from_results
from .noise import NoiseConfig, NoiseModel, NoisePlan, StreamKey
from .vqc import (TrajectoryResult, build_logical_vqc, physical_probabilities,
                  run_trajectory)

INPUT_POINTS: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))

# Stream-path tags so every random decision has a fixed address.
_S_THETA, _S_BATCH, _S_SHOTS, _S_ACCURACY = 0, 1, 2, 3
_PHASE_PLUS, _PHASE_MINUS, _PHASE_EVAL = 0, 1, 2


class AcceptanceStarvationError(RuntimeError):
    """Rerun budget exhausted without an accepted shot."""


@dataclass(frozen=True)
class DataSample:
    x: tuple[int, int]
    y: int

    def __post_init__(self):
        if self.y != self.x[0] ^ self.x[1]:
            raise ValueError(f"label {self.y} is not the parity of {self.x}")

    @property
    def y_signed(self) -> int:
        return 1 if self.y == 0 else -1


def build_dataset(seed: int) -> tuple[list[DataSample], list[DataSample]]:
    """40 parity samples (each point tenfold), shuffled, split 24/16."""
    samples = [DataSample(x, x[0] ^ x[1]) for x in INPUT_POINTS for _ in range(10)]
    rng = StreamKey(seed).generator()
    order = rng.permutation(len(samples))
    shuffled = [samples[i] for i in order]
    return shuffled[:24], shuffled[24:]


@dataclass(frozen=True)
class ShotPolicy:
    shots: int = 1000
    mode: str = "per_shot"          # "per_shot" | "exact"
    max_reruns: int = 1000

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.max_reruns < 1:
            raise ValueError("max_reruns must be >= 1")
        if self.mode not in ("per_shot", "exact"):
            raise ValueError(f"unknown shot mode {self.mode!r}")


@dataclass
class ExpectationEstimate:
    expectation: float
    acceptance_rate: float
    fidelity_records: list[FidelityRecord] = field(default_factory=list)


def _decode_expectation(probs: np.ndarray, encoded: bool) -> float:
    if encoded:
        return decode_logical_readout(probs)[1]
    return float(probs[0] - probs[1])


class _CircuitContext:
    """Clean program, its noise plan, and the pre-measurement ideal state."""

    def __init__(self, input_bits, theta, encoded, rounds, noise: NoiseConfig):
        if rounds > 0 and not encoded:
            raise ValueError("syndrome rounds require the encoded circuit")
        if encoded:
            built = build_logical_vqc(input_bits, theta, rounds)
            self.program: CircuitProgram = built.program
            self.num_readout = 4
        else:
            self.program = build_bare_vqc(input_bits, theta)
            self.num_readout = 1
        self.encoded = encoded
        self.input_bits = tuple(input_bits)
        self.noisy = noise.model is not NoiseModel.NONE
        self.plan = NoisePlan(self.program, noise) if self.noisy else None
        clean = run_trajectory(self.program, exact_postselect=True)
        assert clean.acceptance_prob > 1 - 1e-9
        self.clean_result: TrajectoryResult = clean
        self.clean_probs = (physical_probabilities(clean, 4) if encoded
                            else clean.state.probabilities(
                                [clean.positions[0]]))

    def fidelity_of(self, result: TrajectoryResult) -> FidelityRecord:
        return record_fidelity_from_results(result, self.clean_result,
                                            self.program, self.input_bits)

    def clean_fidelity(self) -> FidelityRecord:
        return FidelityRecord(self.input_bits, 1.0, 1.0, 1.0, True)


def estimate_expectation(input_bits: tuple[int, int], theta: float, *,
                         encoded: bool, rounds: int, noise: NoiseConfig,
                         policy: ShotPolicy, stream: StreamKey,
                         collect_fidelity: bool = False
                         ) -> ExpectationEstimate:
    """Estimate <Z> of the (first logical) qubit for one input point.

    per_shot mode reruns each shot with fresh noise until its syndrome
    record is clean, then samples one readout outcome; the empirical
    histogram is decoded at the end.  exact mode projects onto the
    all-clean syndrome branch per trajectory and averages the exact
    post-selected distributions weighted by acceptance probability.
    """
    ctx = _CircuitContext(input_bits, theta, encoded, rounds, noise)
    if policy.mode == "exact":
        return _estimate_exact(ctx, policy, stream)
    return _estimate_per_shot(ctx, policy, stream, collect_fidelity)


def _estimate_exact(ctx: _CircuitContext, policy: ShotPolicy,
                    stream: StreamKey) -> ExpectationEstimate:
    if not ctx.noisy:
        return ExpectationEstimate(
            _decode_expectation(ctx.clean_probs, ctx.encoded), 1.0)
    dim = 16 if ctx.encoded else 2
    weighted = np.zeros(dim)
    total_weight = 0.0
    acceptance = 0.0
    for shot in range(policy.shots):
        rng = stream.child(shot).generator()
        faults = ctx.plan.sample_faults(rng)
        if not faults:
            weighted += ctx.clean_probs
            total_weight += 1.0
            acceptance += 1.0
            continue
        woven = ctx.plan.apply_faults(faults)
        result = run_trajectory(woven, exact_postselect=True)
        acceptance += result.acceptance_prob
        if result.acceptance_prob <= 0.0:
            continue
        probs = (physical_probabilities(result, 4) if ctx.encoded
                 else result.state.probabilities([result.positions[0]]))
        weighted += result.acceptance_prob * probs
        total_weight += result.acceptance_prob
    if total_weight <= 0.0:
        raise AcceptanceStarvationError(
            "no trajectory retained any post-selected weight")
    probs = weighted / total_weight
    return ExpectationEstimate(_decode_expectation(probs, ctx.encoded),
                               acceptance / policy.shots)


def _estimate_per_shot(ctx: _CircuitContext, policy: ShotPolicy,
                       stream: StreamKey, collect_fidelity: bool
                       ) -> ExpectationEstimate:
    dim = 16 if ctx.encoded else 2
    counts = np.zeros(dim)
    attempts = 0
    records: list[FidelityRecord] = []
    for shot in range(policy.shots):
        rng = stream.child(shot).generator()
        for _ in range(policy.max_reruns):
            attempts += 1
            faults = ctx.plan.sample_faults(rng) if ctx.noisy else []
            if not faults:
                # Fault-free trajectory: syndromes are deterministically
                # clean and the readout distribution is the clean one.
                if collect_fidelity:
                    records.append(ctx.clean_fidelity())
                counts[_sample_from(ctx.clean_probs, rng)] += 1
                break
            woven = ctx.plan.apply_faults(faults)
            result = run_trajectory(woven, rng=rng)
            if not result.accepted:
                continue
            if collect_fidelity:
                records.append(ctx.fidelity_of(result))
            probs = (physical_probabilities(result, 4) if ctx.encoded
                     else result.state.probabilities([result.positions[0]]))
            counts[_sample_from(probs, rng)] += 1
            break
        else:
            raise AcceptanceStarvationError(
                f"shot {shot}: no accepted trajectory in "
                f"{policy.max_reruns} reruns")
    probs = counts / policy.shots
    return ExpectationEstimate(_decode_expectation(probs, ctx.encoded),
                               policy.shots / attempts, records)


def _sample_from(probs: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random()
    return int(min(np.searchsorted(np.cumsum(probs), u, side="right"),
                   len(probs) - 1))


def loss(expectations: list[float], batch: list[DataSample]) -> float:
    """Mean squared error between <Z> and the signed parity labels."""
    if not batch:
        raise ValueError("empty batch")
    if len(expectations) != len(batch):
        raise ValueError("expectations and batch lengths differ")
    return float(np.mean([(e - s.y_signed) ** 2
                          for e, s in zip(expectations, batch)]))


@dataclass(frozen=True)
class TrainRunConfig:
    """Everything one training run needs apart from its seed."""

    noise: NoiseConfig = NoiseConfig()
    encoded: bool = True
    rounds: int = 0
    policy: ShotPolicy = ShotPolicy()
    iterations: int = 100
    batch_size: int = 8
    learning_rate: float = 0.3
    fd_delta: float = math.pi / 2
    optimizer: str = "adam"         # "adam" | "gd"
    accuracy_metric: str = "single_shot"   # "single_shot" | "sign"
    dataset_seed: int = 20250101

    def __post_init__(self):
        if self.optimizer not in ("adam", "gd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.accuracy_metric not in ("single_shot", "sign"):
            raise ValueError(f"unknown accuracy metric {self.accuracy_metric!r}")
        if self.rounds > 0 and not self.encoded:
            raise ValueError("rounds > 0 requires the encoded circuit")


@dataclass
class TrainState:
    theta: float
    iteration: int
    loss_history: list[float] = field(default_factory=list)
    accuracy_history: list[float] = field(default_factory=list)
    test_accuracy_history: list[float] = field(default_factory=list)
    theta_history: list[float] = field(default_factory=list)
    acceptance_history: list[float] = field(default_factory=list)


def _unique_inputs(samples: list[DataSample]) -> list[tuple[int, int]]:
    seen: list[tuple[int, int]] = []
    for s in samples:
        if s.x not in seen:
            seen.append(s.x)
    return sorted(seen)


def _input_id(x: tuple[int, int]) -> int:
    return x[0] * 2 + x[1]


def train(config: TrainRunConfig, seed: int) -> TrainState:
    """Mini-batch gradient descent on the single rotation parameter.

    Per iteration: draw a batch, estimate the finite-difference gradient of
    the batch loss, step theta, then log loss/accuracy over the full
    training split (sign(<Z>) must match the signed label; an exact zero
    counts incorrect) and accuracy over the held-out test split.
    """
    root = StreamKey(seed)
    train_set, test_set = build_dataset(config.dataset_seed)
    theta = float(root.child(_S_THETA).generator().uniform(0, 2 * math.pi))
    state = TrainState(theta=theta, iteration=0)

    adam_m, adam_v = 0.0, 0.0

    def estimates_for(inputs, theta_value, iteration, phase):
        out = {}
        acceptances = []
        for x in inputs:
            est = estimate_expectation(
                x, theta_value, encoded=config.encoded, rounds=config.rounds,
                noise=config.noise, policy=config.policy,
                stream=root.child(_S_SHOTS, iteration, phase, _input_id(x)))
            out[x] = est.expectation
            acceptances.append(est.acceptance_rate)
        return out, float(np.mean(acceptances))

    for iteration in range(1, config.iterations + 1):
        rng_batch = root.child(_S_BATCH, iteration).generator()
        picks = rng_batch.choice(len(train_set), size=config.batch_size,
                                 replace=False)
        batch = [train_set[int(i)] for i in picks]
        batch_inputs = _unique_inputs(batch)

        plus, _ = estimates_for(batch_inputs, theta + config.fd_delta,
                                iteration, _PHASE_PLUS)
        minus, _ = estimates_for(batch_inputs, theta - config.fd_delta,
                                 iteration, _PHASE_MINUS)
        loss_plus = loss([plus[s.x] for s in batch], batch)
        loss_minus = loss([minus[s.x] for s in batch], batch)
        grad = (loss_plus - loss_minus) / (2 * config.fd_delta)

        if config.optimizer == "adam":
            adam_m = 0.9 * adam_m + 0.1 * grad
            adam_v = 0.999 * adam_v + 0.001 * grad * grad
            m_hat = adam_m / (1 - 0.9 ** iteration)
            v_hat = adam_v / (1 - 0.999 ** iteration)
            theta -= config.learning_rate * m_hat / (math.sqrt(v_hat) + 1e-8)
        else:
            theta -= config.learning_rate * grad

        evals, acceptance = estimates_for(_unique_inputs(train_set), theta,
                                          iteration, _PHASE_EVAL)
        train_loss = loss([evals[s.x] for s in train_set], train_set)
        if config.accuracy_metric == "sign":
            train_acc = _sign_accuracy(evals, train_set)
            test_acc = _sign_accuracy(evals, test_set)
        else:
            rng_acc = root.child(_S_ACCURACY, iteration).generator()
            train_acc = _single_shot_accuracy(evals, train_set, rng_acc)
            test_acc = _single_shot_accuracy(evals, test_set, rng_acc)

        state.theta = theta
        state.iteration = iteration
        state.loss_history.append(train_loss)
        state.accuracy_history.append(train_acc)
        state.test_accuracy_history.append(test_acc)
        state.theta_history.append(theta)
        state.acceptance_history.append(acceptance)
    return state


def _sign_accuracy(expectations: dict[tuple[int, int], float],
                   samples: list[DataSample]) -> float:
    """Hard decision rule: sign(<Z>) must equal the label; zero is wrong."""
    correct = 0
    for s in samples:
        e = expectations[s.x]
        if e != 0.0 and math.copysign(1.0, e) == s.y_signed:
            correct += 1
    return correct / len(samples)


def _single_shot_accuracy(expectations: dict[tuple[int, int], float],
                          samples: list[DataSample],
                          rng: np.random.Generator) -> float:
    """Each sample classified by one readout shot.

    A single Z-basis readout of the (logical) first qubit agrees with the
    signed label with probability (1 + y<Z>)/2, so accuracy per iteration
    is an empirical mean of those Bernoulli draws; noise-free convergence
    still pins it to 1.0 because <Z> reaches exactly +-1.
    """
    correct = 0
    for s in samples:
        p_correct = (1 + s.y_signed * expectations[s.x]) / 2
        if p_correct >= 1.0 or rng.random() < p_correct:
            correct += 1
    return correct / len(samples)


def mean_final_accuracy(histories: list[list[float]]
                        ) -> tuple[float, float]:
    """Mean/std across runs of each run's mean accuracy over iterations 61-100."""
    per_record = []
    for h in histories:
        if len(h) < 100:
            raise ValueError(
                f"history of length {len(h)} is shorter than 100 iterations")
        per_record.append(float(np.mean(h[60:100])))
    return float(np.mean(per_record)), float(np.std(per_record))
