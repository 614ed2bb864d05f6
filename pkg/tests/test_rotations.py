"""Logical rotation fragments: structure, Eq.-style amplitudes, equivalence."""
import numpy as np
import pytest

from qvl.circuit import ProgramBuilder, Register
from qvl.code422 import (CODEWORD_OUTCOMES, LABELS, decode_logical_readout,
                         encode_logical, logical_cnot, mirror_invariant_holds)
from qvl.rotations import (AncillaRegistry, RegistryError, logical_rotation_single,
                           logical_rx_pair, logical_ry_pair, logical_rz_pair)
from qvl.vqc import build_bare_vqc, build_logical_vqc, physical_probabilities, run_trajectory


def fresh_encoded(label):
    b = ProgramBuilder()
    phys = [b.alloc(Register.PHYSICAL) for _ in range(4)]
    encode_logical(b, phys, label)
    return b, phys, AncillaRegistry()


def bare_z(bits, theta):
    result = run_trajectory(build_bare_vqc(bits, theta), exact_postselect=True)
    probs = result.state.probabilities([result.positions[0]])
    return float(probs[0] - probs[1])


class TestRxPair:
    def test_full_state_pattern_on_01(self):
        # After the first rotation layer on input 01, the amplitudes carry
        # (-ics, c^2, -s^2, -isc) over the four labels with mirrored
        # ancillas, each codeword term weighted 1/sqrt(2).
        rng = np.random.default_rng(2)
        for theta in rng.uniform(0, 2 * np.pi, 20):
            b, phys, reg = fresh_encoded((0, 1))
            logical_rx_pair(b, float(theta), reg, phys, input_label=(0, 1))
            result = run_trajectory(b.build(), exact_postselect=True)
            c, s = np.cos(theta / 2), np.sin(theta / 2)
            coeff = {(0, 0): -1j * c * s, (0, 1): c * c,
                     (1, 0): -s * s, (1, 1): -1j * s * c}
            expected = np.zeros(64, dtype=complex)
            for label, outcomes in CODEWORD_OUTCOMES.items():
                anc = (label[0] << 4) | (label[1] << 5)
                for o in outcomes:
                    expected[o | anc] = coeff[label] / np.sqrt(2)
            np.testing.assert_allclose(result.state.amps, expected, atol=1e-10)

    def test_theta_zero_mirrors_label_only(self):
        for label in LABELS:
            b, phys, reg = fresh_encoded(label)
            logical_rx_pair(b, 0.0, reg, phys, input_label=label)
            result = run_trajectory(b.build(), exact_postselect=True)
            probs = physical_probabilities(result, 4)
            for o in CODEWORD_OUTCOMES[label]:
                assert abs(probs[o] - 0.5) < 1e-12
            assert mirror_invariant_holds(result.state, reg,
                                          positions=result.positions)

    def test_matches_bare_rx_for_random_thetas(self):
        rng = np.random.default_rng(6)
        for theta in rng.uniform(0, 2 * np.pi, 20):
            for label in LABELS:
                b, phys, reg = fresh_encoded(label)
                logical_rx_pair(b, float(theta), reg, phys, input_label=label)
                result = run_trajectory(b.build(), exact_postselect=True)
                _, z = decode_logical_readout(physical_probabilities(result, 4))

                bare = ProgramBuilder()
                q0 = bare.alloc(Register.PHYSICAL)
                q1 = bare.alloc(Register.PHYSICAL)
                if label[0]:
                    bare.add("X", q0)
                if label[1]:
                    bare.add("X", q1)
                bare.add("RX", q0, angle=float(theta))
                bare.add("RX", q1, angle=float(theta))
                bres = run_trajectory(bare.build(), exact_postselect=True)
                probs = bres.state.probabilities([bres.positions[0]])
                assert abs(z - (probs[0] - probs[1])) < 1e-9

    def test_first_layer_requires_label(self):
        b, phys, reg = fresh_encoded((0, 0))
        with pytest.raises(RegistryError, match="label"):
            logical_rx_pair(b, 0.3, reg, phys)

    def test_fragment_gate_count(self):
        # Step-3 conjugation (4 CNOTs), two rotations, un-apply (4 CNOTs),
        # plus one classical init X per set label bit.
        b, phys, reg = fresh_encoded((0, 1))
        ops = logical_rx_pair(b, 0.4, reg, phys, input_label=(0, 1))
        assert len(ops) == 11
        b, phys, reg = fresh_encoded((0, 0))
        ops = logical_rx_pair(b, 0.4, reg, phys, input_label=(0, 0))
        assert len(ops) == 10


class TestRzPair:
    def test_fragment_is_two_cnots_two_rotations(self):
        b, phys, reg = fresh_encoded((0, 1))
        logical_rx_pair(b, 0.4, reg, phys, input_label=(0, 1))
        ops = logical_rz_pair(b, 0.4, reg)
        assert len(ops) == 4
        kinds = sorted(op.kind for op in ops)
        assert kinds == ["CNOT", "CNOT", "RZ", "RZ"]

    def test_requires_prior_pair(self):
        b, phys, reg = fresh_encoded((0, 1))
        with pytest.raises(RegistryError):
            logical_rz_pair(b, 0.4, reg)

    def test_theta_zero_keeps_marginals(self):
        b, phys, reg = fresh_encoded((1, 0))
        logical_rx_pair(b, 0.8, reg, phys, input_label=(1, 0))
        before = run_trajectory(b.build(), exact_postselect=True)
        probs_before = physical_probabilities(before, 4)
        logical_rz_pair(b, 0.0, reg)
        after = run_trajectory(b.build(), exact_postselect=True)
        probs_after = physical_probabilities(after, 4)
        np.testing.assert_allclose(probs_before, probs_after, atol=1e-12)
        assert mirror_invariant_holds(after.state, reg,
                                      positions=after.positions)

    def test_rx_rz_decode_matches_bare(self):
        rng = np.random.default_rng(7)
        for theta in rng.uniform(0, 2 * np.pi, 20):
            b, phys, reg = fresh_encoded((0, 1))
            logical_rx_pair(b, float(theta), reg, phys, input_label=(0, 1))
            logical_rz_pair(b, float(theta), reg)
            result = run_trajectory(b.build(), exact_postselect=True)
            _, z = decode_logical_readout(physical_probabilities(result, 4))

            bare = ProgramBuilder()
            q0 = bare.alloc(Register.PHYSICAL)
            q1 = bare.alloc(Register.PHYSICAL)
            bare.add("X", q1)
            for kind in ("RX", "RZ"):
                bare.add(kind, q0, angle=float(theta))
                bare.add(kind, q1, angle=float(theta))
            bres = run_trajectory(bare.build(), exact_postselect=True)
            probs = bres.state.probabilities([bres.positions[0]])
            assert abs(z - (probs[0] - probs[1])) < 1e-9


class TestRyPair:
    def build_through_ry(self, label, theta):
        b, phys, reg = fresh_encoded(label)
        logical_rx_pair(b, theta, reg, phys, input_label=label)
        logical_rz_pair(b, theta, reg)
        logical_cnot(b, phys, reg)
        ops = logical_ry_pair(b, theta, reg, phys)
        return b, phys, reg, ops

    def test_requires_two_pairs(self):
        b, phys, reg = fresh_encoded((0, 0))
        logical_rx_pair(b, 0.4, reg, phys, input_label=(0, 0))
        with pytest.raises(RegistryError, match="two prior pairs"):
            logical_ry_pair(b, 0.4, reg, phys)

    def test_mirror_symmetry_of_fragment(self):
        # The conjugation replays in reverse around the rotation column.
        _, _, _, ops = self.build_through_ry((0, 0), 0.9)
        cnots = [op for op in ops if op.kind == "CNOT"]
        copy, pre, post = cnots[:2], cnots[2:10], cnots[10:]
        assert len(pre) == len(post) == 8
        assert [op.qubits for op in post] == [op.qubits for op in reversed(pre)]
        rotations = [op for op in ops if op.kind == "RY"]
        assert len(rotations) == 2

    def test_theta_zero_preserves_state_with_mirroring(self):
        b, phys, reg, _ = self.build_through_ry((1, 0), 0.0)
        result = run_trajectory(b.build(), exact_postselect=True)
        # theta=0 everywhere: state is the encoded post-CNOT label with all
        # ancillas mirroring it; physical register must be exactly the
        # logical-CNOT image of the input.
        _, z = decode_logical_readout(physical_probabilities(result, 4))
        assert abs(z - (-1.0)) < 1e-12   # (1,0) -> (1,1), first bit 1
        assert mirror_invariant_holds(result.state, reg,
                                      positions=result.positions)

    def test_full_vqc_equivalence_100_thetas(self):
        rng = np.random.default_rng(8)
        for theta in rng.uniform(0, 2 * np.pi, 100):
            for label in LABELS:
                built = build_logical_vqc(label, float(theta), rounds=0)
                result = run_trajectory(built.program, exact_postselect=True)
                _, z = decode_logical_readout(physical_probabilities(result, 4))
                assert abs(z - bare_z(label, float(theta))) < 1e-9


class TestFragmentUnitarity:
    def test_norm_preserved_through_all_layers(self):
        built = build_logical_vqc((1, 1), 2.3, rounds=5)
        result = run_trajectory(built.program, exact_postselect=True)
        assert abs(result.state.norm() - 1) < 1e-9
        assert mirror_invariant_holds(result.state, built.registry,
                                      positions=result.positions)


class TestSingleQubitRotations:
    def test_single_rotation_matches_bare_on_one_qubit(self):
        rng = np.random.default_rng(9)
        for kind in ("RX", "RY", "RZ"):
            for logical_qubit in (0, 1):
                theta = float(rng.uniform(0, 2 * np.pi))
                label = (1, 0)
                b, phys, reg = fresh_encoded(label)
                logical_rotation_single(b, kind, theta, logical_qubit, reg,
                                        phys, label_bit=label[logical_qubit])
                result = run_trajectory(b.build(), exact_postselect=True)
                _, z = decode_logical_readout(physical_probabilities(result, 4))

                bare = ProgramBuilder()
                q0 = bare.alloc(Register.PHYSICAL)
                q1 = bare.alloc(Register.PHYSICAL)
                bare.add("X", q0)
                bare.add(kind, (q0, q1)[logical_qubit], angle=theta)
                bres = run_trajectory(bare.build(), exact_postselect=True)
                probs = bres.state.probabilities([bres.positions[0]])
                assert abs(z - (probs[0] - probs[1])) < 1e-9

    def test_mirror_after_single_rotation(self):
        b, phys, reg = fresh_encoded((0, 1))
        logical_rotation_single(b, "RY", 1.3, 1, reg, phys, label_bit=1)
        result = run_trajectory(b.build(), exact_postselect=True)
        assert mirror_invariant_holds(result.state, reg,
                                      positions=result.positions)

    def test_sequential_singles_back_propagate(self):
        theta1, theta2 = 0.7, 1.9
        label = (0, 1)
        b, phys, reg = fresh_encoded(label)
        logical_rotation_single(b, "RX", theta1, 0, reg, phys, label_bit=0)
        logical_rotation_single(b, "RY", theta2, 0, reg, phys)
        result = run_trajectory(b.build(), exact_postselect=True)
        _, z = decode_logical_readout(physical_probabilities(result, 4))

        bare = ProgramBuilder()
        q0 = bare.alloc(Register.PHYSICAL)
        q1 = bare.alloc(Register.PHYSICAL)
        bare.add("X", q1)
        bare.add("RX", q0, angle=theta1)
        bare.add("RY", q0, angle=theta2)
        bres = run_trajectory(bare.build(), exact_postselect=True)
        probs = bres.state.probabilities([bres.positions[0]])
        assert abs(z - (probs[0] - probs[1])) < 1e-9
