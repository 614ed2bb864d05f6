"""Training loop: dataset, expectation estimation, loss, convergence."""
import numpy as np
import pytest

from qvl.noise import NoiseConfig, StreamKey
from qvl.training import (AcceptanceStarvationError, DataSample, ShotPolicy,
                          TrainRunConfig, build_dataset, estimate_expectation,
                          loss, mean_final_accuracy, train)

NOISELESS = NoiseConfig()


class TestDataset:
    def test_counts_and_parity(self):
        train_set, test_set = build_dataset(0)
        assert len(train_set) == 24 and len(test_set) == 16
        for s in train_set + test_set:
            assert s.y == s.x[0] ^ s.x[1]
            assert s.y_signed == (1 if s.y == 0 else -1)

    def test_each_point_appears_ten_times(self):
        train_set, test_set = build_dataset(3)
        combined = train_set + test_set
        for point in ((0, 0), (0, 1), (1, 0), (1, 1)):
            assert sum(1 for s in combined if s.x == point) == 10

    def test_seed_determinism(self):
        a = build_dataset(7)
        b = build_dataset(7)
        c = build_dataset(8)
        assert a == b
        assert a != c

    def test_label_validation(self):
        with pytest.raises(ValueError):
            DataSample((0, 1), 0)


class TestLoss:
    def test_perfect_predictions(self):
        batch = [DataSample((0, 0), 0), DataSample((0, 1), 1)]
        assert loss([1.0, -1.0], batch) == 0.0

    def test_all_zero_expectations(self):
        batch = [DataSample((0, 0), 0), DataSample((1, 0), 1)]
        assert loss([0.0, 0.0], batch) == 1.0

    def test_single_sample(self):
        assert loss([0.5], [DataSample((0, 0), 0)]) == 0.25

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            loss([], [])


class TestEstimateExpectation:
    def test_theta_zero_is_cnot_result(self):
        # rotations vanish; q0 stays at its input bit
        for policy in (ShotPolicy(shots=50, mode="per_shot"),
                       ShotPolicy(mode="exact")):
            for encoded in (False, True):
                for rounds in ((0, 3) if encoded else (0,)):
                    est = estimate_expectation(
                        (1, 0), 0.0, encoded=encoded, rounds=rounds,
                        noise=NOISELESS, policy=policy, stream=StreamKey(0))
                    assert est.expectation == -1.0
                    assert est.acceptance_rate == 1.0

    def test_rounds_require_encoded(self):
        with pytest.raises(ValueError, match="encoded"):
            estimate_expectation((0, 0), 0.3, encoded=False, rounds=1,
                                 noise=NOISELESS, policy=ShotPolicy(),
                                 stream=StreamKey(0))

    def test_modes_agree_noise_free(self):
        theta = 1.234
        exact = estimate_expectation((0, 1), theta, encoded=True, rounds=0,
                                     noise=NOISELESS,
                                     policy=ShotPolicy(mode="exact"),
                                     stream=StreamKey(0))
        sampled = estimate_expectation((0, 1), theta, encoded=True, rounds=0,
                                       noise=NOISELESS,
                                       policy=ShotPolicy(shots=100_000),
                                       stream=StreamKey(1))
        sigma = np.sqrt((1 - exact.expectation ** 2) / 100_000) + 1e-12
        assert abs(sampled.expectation - exact.expectation) < 4 * sigma

    def test_modes_agree_under_noise(self):
        theta = 0.9
        noise = NoiseConfig(model="gate", p_phys=0.02, f_anc=1.0)
        exact = estimate_expectation((1, 0), theta, encoded=True, rounds=1,
                                     noise=noise,
                                     policy=ShotPolicy(shots=400, mode="exact"),
                                     stream=StreamKey(5))
        sampled = estimate_expectation((1, 0), theta, encoded=True, rounds=1,
                                       noise=noise,
                                       policy=ShotPolicy(shots=4000,
                                                         max_reruns=500),
                                       stream=StreamKey(6))
        assert abs(sampled.expectation - exact.expectation) < 0.08
        assert abs(sampled.acceptance_rate - exact.acceptance_rate) < 0.05

    def test_acceptance_one_without_noise(self):
        for rounds in (1, 3, 5):
            est = estimate_expectation((1, 1), 0.7, encoded=True,
                                       rounds=rounds, noise=NOISELESS,
                                       policy=ShotPolicy(shots=50),
                                       stream=StreamKey(2))
            assert est.acceptance_rate == 1.0

    def test_acceptance_starvation(self):
        noise = NoiseConfig(model="gate", p_phys=0.3, f_anc=1.0)
        with pytest.raises(AcceptanceStarvationError):
            estimate_expectation((0, 1), 0.7, encoded=True, rounds=5,
                                 noise=noise,
                                 policy=ShotPolicy(shots=200, max_reruns=2),
                                 stream=StreamKey(3))

    def test_determinism(self):
        noise = NoiseConfig(model="environmental", p_phys=0.05, f_anc=0.5)
        kwargs = dict(encoded=True, rounds=2, noise=noise,
                      policy=ShotPolicy(shots=200, max_reruns=200))
        a = estimate_expectation((0, 1), 1.1, stream=StreamKey(9), **kwargs)
        b = estimate_expectation((0, 1), 1.1, stream=StreamKey(9), **kwargs)
        assert a.expectation == b.expectation
        assert a.acceptance_rate == b.acceptance_rate


class TestTrain:
    def test_noiseless_bare_converges(self):
        config = TrainRunConfig(encoded=False, policy=ShotPolicy(mode="exact"))
        state = train(config, seed=0)
        assert max(state.accuracy_history) == 1.0
        assert np.mean(state.accuracy_history[60:]) > 0.99
        assert len(state.loss_history) == state.iteration == 100

    def test_noiseless_logical_matches_bare_exactly(self):
        bare = train(TrainRunConfig(encoded=False,
                                    policy=ShotPolicy(mode="exact")), seed=1)
        logical = train(TrainRunConfig(encoded=True, rounds=2,
                                       policy=ShotPolicy(mode="exact")), seed=1)
        np.testing.assert_allclose(bare.theta_history, logical.theta_history,
                                   atol=1e-9)
        np.testing.assert_allclose(bare.loss_history, logical.loss_history,
                                   atol=1e-9)
        assert bare.accuracy_history == logical.accuracy_history

    def test_histories_and_ranges(self):
        config = TrainRunConfig(
            encoded=True, rounds=1, iterations=8,
            noise=NoiseConfig(model="gate", p_phys=0.01, f_anc=0.5),
            policy=ShotPolicy(shots=40, max_reruns=200))
        state = train(config, seed=5)
        assert state.iteration == 8
        for h in (state.accuracy_history, state.test_accuracy_history):
            assert len(h) == 8 and all(0 <= a <= 1 for a in h)
        assert all(l >= 0 for l in state.loss_history)
        assert all(0 < a <= 1 for a in state.acceptance_history)

    def test_bitwise_reproducible(self):
        config = TrainRunConfig(
            encoded=True, rounds=0, iterations=6,
            noise=NoiseConfig(model="environmental", p_phys=0.02, f_anc=1.0),
            policy=ShotPolicy(shots=30, max_reruns=100))
        a = train(config, seed=11)
        b = train(config, seed=11)
        assert a.theta_history == b.theta_history
        assert a.loss_history == b.loss_history
        assert a.accuracy_history == b.accuracy_history

    def test_sign_metric_option(self):
        config = TrainRunConfig(encoded=False, policy=ShotPolicy(mode="exact"),
                                accuracy_metric="sign", iterations=60)
        state = train(config, seed=0)
        assert state.accuracy_history[-1] == 1.0


class TestMeanFinalAccuracy:
    def test_constant_histories(self):
        assert mean_final_accuracy([[1.0] * 100] * 3) == (1.0, 0.0)
        assert mean_final_accuracy([[0.5] * 100] * 4) == (0.5, 0.0)

    def test_alternating_records(self):
        histories = [[0.9] * 100, [1.0] * 100] * 5
        mean, std = mean_final_accuracy(histories)
        assert abs(mean - 0.95) < 1e-12
        assert abs(std - 0.05) < 1e-12

    def test_only_last_40_iterations_count(self):
        history = [0.0] * 60 + [1.0] * 40
        assert mean_final_accuracy([history]) == (1.0, 0.0)

    def test_short_history_rejected(self):
        with pytest.raises(ValueError, match="shorter"):
            mean_final_accuracy([[1.0] * 99])
