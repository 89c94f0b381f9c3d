import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_qnn import sim
from hybrid_qnn.errors import ConfigurationError
from hybrid_qnn.sim import GateOp, StateVector, apply_gate, expectation_z, new_zero_state, run_gates

from . import oracles


def to_ops(specs):
    return [GateOp(k, t, control=c, angle=a) for k, t, c, a in specs]


def basis_state(n, index):
    amps = np.zeros(2**n, dtype=complex)
    amps[index] = 1.0
    return StateVector(n, amps)


def random_state(rng, n):
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(n, amps / np.linalg.norm(amps))


class TestZeroState:
    def test_one_qubit(self):
        np.testing.assert_array_equal(new_zero_state(1).amplitudes, [1, 0])

    def test_four_qubits(self):
        amps = new_zero_state(4).amplitudes
        assert amps.shape == (16,)
        assert amps[0] == 1 and not np.any(amps[1:])

    @pytest.mark.parametrize("n", [0, -1, 21, 2.5])
    def test_out_of_range(self, n):
        with pytest.raises(ConfigurationError):
            new_zero_state(n)

    def test_amplitudes_are_read_only(self):
        with pytest.raises(ValueError):
            new_zero_state(2).amplitudes[0] = 0

    def test_length_mismatch(self):
        with pytest.raises(ConfigurationError):
            StateVector(2, [1, 0, 0])


class TestGates:
    def test_rx_pi_flips_with_phase(self):
        out = apply_gate(new_zero_state(1), GateOp("RX", 0, angle=np.pi))
        np.testing.assert_allclose(out.amplitudes, [0, -1j], atol=1e-15)
        assert expectation_z(out, 0) == pytest.approx(-1.0, abs=1e-15)

    def test_cz_on_basis_states(self):
        cz = GateOp("CZ", 1, control=0)
        for index, sign in [(0b00, 1), (0b01, 1), (0b10, 1), (0b11, -1)]:
            out = apply_gate(basis_state(2, index), cz)
            expected = np.zeros(4, dtype=complex)
            expected[index] = sign
            np.testing.assert_array_equal(out.amplitudes, expected)

    @pytest.mark.parametrize("theta", np.linspace(-7, 7, 9))
    def test_rz_keeps_probabilities(self, theta):
        out = apply_gate(new_zero_state(1), GateOp("RZ", 0, angle=theta))
        np.testing.assert_allclose(out.probabilities, [1, 0], atol=1e-15)

    def test_qubit_zero_is_least_significant_bit(self):
        out = apply_gate(new_zero_state(3), GateOp("RX", 0, angle=np.pi))
        assert np.argmax(out.probabilities) == 1
        out = apply_gate(new_zero_state(3), GateOp("RX", 2, angle=np.pi))
        assert np.argmax(out.probabilities) == 4

    def test_input_state_is_untouched(self):
        state = new_zero_state(2)
        apply_gate(state, GateOp("RY", 1, angle=0.7))
        np.testing.assert_array_equal(state.amplitudes, [1, 0, 0, 0])

    @pytest.mark.parametrize(
        "gate",
        [GateOp("RX", 4, angle=0.1), GateOp("CZ", 0, control=5), GateOp("CZ", 7, control=1)],
    )
    def test_invalid_qubit_index(self, gate):
        with pytest.raises(IndexError):
            apply_gate(new_zero_state(4), gate)

    def test_gate_validation(self):
        with pytest.raises(ConfigurationError):
            GateOp("H", 0)
        with pytest.raises(ConfigurationError):
            GateOp("RX", 0, angle=float("nan"))
        with pytest.raises(ConfigurationError):
            GateOp("RY", 0)
        with pytest.raises(ConfigurationError):
            GateOp("CZ", 1, control=1)
        with pytest.raises(IndexError):
            GateOp("RZ", -1, angle=0.0)

    def test_random_50_gate_circuit_matches_dense_product(self):
        rng = np.random.default_rng(7)
        specs = oracles.random_gates(rng, 4, 50)
        ops = to_ops(specs)
        np.testing.assert_allclose(run_gates(ops, 4).amplitudes, oracles.run_dense(ops, 4), atol=1e-10)

    @pytest.mark.parametrize("kind", sim.ROTATIONS)
    def test_rotation_matrices_match_matrix_exponential(self, kind):
        for theta in np.linspace(-2 * np.pi, 2 * np.pi, 13):
            np.testing.assert_allclose(
                sim.rotation_matrices(kind, theta)[0], oracles.rotation(kind, theta), atol=1e-14
            )


class TestExpectation:
    def test_zero_state(self):
        s = new_zero_state(4)
        assert [expectation_z(s, q) for q in range(4)] == [1.0] * 4

    def test_rx_half_pi(self):
        s = apply_gate(new_zero_state(1), GateOp("RX", 0, angle=np.pi / 2))
        assert expectation_z(s, 0) == pytest.approx(0.0, abs=1e-15)

    def test_random_states_match_dense_operator(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(1, 6))
            s = random_state(rng, n)
            for q in range(n):
                assert abs(expectation_z(s, q) - oracles.expect_z_dense(s.amplitudes, q, n)) < 1e-12

    def test_invalid_qubit(self):
        with pytest.raises(IndexError):
            expectation_z(new_zero_state(2), 2)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(11)
        states = [random_state(rng, 3) for _ in range(5)]
        batch = sim.expectation_z_batch(np.stack([s.amplitudes for s in states]), 3)
        single = [[expectation_z(s, q) for q in range(3)] for s in states]
        np.testing.assert_allclose(batch, single, atol=1e-14)


class TestBatchKernels:
    def test_per_row_angles(self):
        angles = np.array([0.0, np.pi / 2, np.pi])
        out = sim.apply_rotation_batch(sim.zero_states(3, 1), 1, "RX", 0, angles)
        np.testing.assert_allclose(sim.expectation_z_batch(out, 1)[:, 0], np.cos(angles), atol=1e-15)

    def test_product_state_ordering(self):
        zero = np.array([[1, 0]], dtype=complex)
        one = np.array([[0, 1]], dtype=complex)
        # qubit 0 in |1>, qubits 1, 2 in |0>  ->  index 1
        out = sim.product_state_batch([one, zero, zero])
        assert np.argmax(abs(out[0])) == 1

    def test_cz_diagonal_is_product_of_gates(self):
        pairs = [(0, 1), (1, 2), (2, 3), (3, 0)]
        expected = np.diag(np.linalg.multi_dot([oracles.cz_dense(c, t, 4) for c, t in pairs])).real
        np.testing.assert_array_equal(sim.cz_diagonal(4, pairs), expected)

    def test_mismatched_angle_count(self):
        with pytest.raises(ConfigurationError):
            sim.apply_rotation_batch(sim.zero_states(3, 2), 2, "RY", 0, [0.1, 0.2])


gate_strategy = st.one_of(
    st.tuples(
        st.sampled_from(sim.ROTATIONS),
        st.integers(0, 3),
        st.none(),
        st.floats(-10, 10, allow_nan=False),
    ),
    st.tuples(st.just("CZ"), st.integers(0, 3), st.integers(0, 3), st.none()).filter(lambda g: g[1] != g[2]),
)
circuits = st.lists(gate_strategy, max_size=100)


@settings(max_examples=60, deadline=None)
@given(circuits)
def test_norm_preserved(specs):
    assert abs(run_gates(to_ops(specs), 4).norm_squared() - 1.0) < 1e-12


@settings(max_examples=60, deadline=None)
@given(circuits)
def test_oracle_equivalence(specs):
    ops = to_ops(specs)
    out = run_gates(ops, 4)
    ref = oracles.run_dense(ops, 4)
    np.testing.assert_allclose(out.amplitudes, ref, atol=1e-10)
    for q in range(4):
        z = expectation_z(out, q)
        assert -1.0 <= z <= 1.0
        assert abs(z - oracles.expect_z_dense(ref, q, 4)) < 1e-10


@settings(max_examples=60, deadline=None)
@given(circuits, gate_strategy)
def test_inverse_round_trip(specs, gate):
    state = run_gates(to_ops(specs), 4)
    kind, target, control, angle = gate
    forward = GateOp(kind, target, control=control, angle=angle)
    inverse = forward if kind == "CZ" else GateOp(kind, target, angle=-angle)
    back = apply_gate(apply_gate(state, forward), inverse)
    np.testing.assert_allclose(back.amplitudes, state.amplitudes, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    circuits,
    st.integers(0, 3),
    st.integers(0, 3),
    st.floats(-10, 10, allow_nan=False),
    st.floats(-10, 10, allow_nan=False),
)
def test_rz_and_rx_on_distinct_qubits_commute(specs, a, b, alpha, beta):
    if a == b:
        return
    state = run_gates(to_ops(specs), 4)
    rz, rx = GateOp("RZ", a, angle=alpha), GateOp("RX", b, angle=beta)
    one = apply_gate(apply_gate(state, rz), rx)
    two = apply_gate(apply_gate(state, rx), rz)
    np.testing.assert_allclose(one.amplitudes, two.amplitudes, atol=1e-12)
