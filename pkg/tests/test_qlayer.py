import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_qnn import qlayer, sim
from hybrid_qnn.errors import ConfigurationError, DataError, ShapeError
from hybrid_qnn.qlayer import QuantumCircuit, VariationalParams, build_circuit, evaluate, render_ascii

from . import oracles


def random_setup(rng, n_layers=2, n_qubits=4):
    return rng.uniform(-np.pi, np.pi, n_qubits), VariationalParams.random(rng, n_layers, n_qubits)


def reference_outputs(features, params, **options):
    circuit = build_circuit(features, params, **options)
    psi = oracles.run_dense(circuit.gates, params.n_qubits)
    return np.array([oracles.expect_z_dense(psi, q, params.n_qubits) for q in range(params.n_qubits)])


class TestBuildCircuit:
    def test_paper_configuration_gate_count(self):
        c = build_circuit(np.zeros(4), VariationalParams.zeros(2, 4))
        kinds = [g.kind for g in c.gates]
        assert len(c.gates) == 44
        assert kinds.count("CZ") == 8
        assert len(c.param_slots) == 24

    def test_zero_layers_is_embedding_only(self):
        c = build_circuit(np.zeros(4), VariationalParams.zeros(0, 4))
        assert len(c.gates) == 12
        assert all(g.is_rotation for g in c.gates)
        assert c.param_slots == {}

    def test_layout(self):
        x = np.array([0.1, 0.2, 0.3, 0.4])
        params = VariationalParams(np.arange(24, dtype=float).reshape(2, 4, 3))
        c = build_circuit(x, params)
        embedding = c.gates[:12]
        assert [(g.kind, g.target, g.angle) for g in embedding[:3]] == [
            ("RX", 0, 0.1),
            ("RY", 0, 0.1),
            ("RZ", 0, 0.1),
        ]
        layer1 = c.gates[12:28]
        assert [g.kind for g in layer1[:3]] == ["RX", "RY", "RZ"]
        assert [(g.control, g.target) for g in layer1[12:]] == [(0, 1), (1, 2), (2, 3), (3, 0)]
        # parameter p = (layer * n + qubit) * 3 + axis
        assert c.gates[c.param_slots[17][0]] == sim.GateOp("RZ", 1, angle=17.0)

    def test_param_slots_cover_only_variational_rotations(self):
        c = build_circuit(np.ones(4), VariationalParams.zeros(2, 4))
        positions = sorted(pos for v in c.param_slots.values() for pos in v)
        assert all(pos >= 12 for pos in positions)
        assert all(c.gates[pos].is_rotation for pos in positions)
        assert len(positions) == 24

    def test_feature_count_mismatch(self):
        with pytest.raises(ShapeError):
            build_circuit(np.zeros(3), VariationalParams.zeros(2, 4))

    def test_non_finite_features(self):
        with pytest.raises(DataError):
            evaluate([0.0, np.nan, 0.0, 0.0], VariationalParams.zeros(1, 4))

    def test_param_shapes(self):
        with pytest.raises(ShapeError):
            VariationalParams(np.zeros((2, 4)))
        with pytest.raises(ShapeError):
            VariationalParams.from_flat(np.zeros(23), 2, 4)
        with pytest.raises(ConfigurationError):
            VariationalParams(np.full((1, 1, 3), np.inf))
        assert VariationalParams.zeros(2, 4).n_params == 24

    def test_slot_on_cz_rejected(self):
        with pytest.raises(ConfigurationError):
            QuantumCircuit(2, (sim.GateOp("CZ", 1, control=0),), {0: (0,)})

    @pytest.mark.parametrize("n, expected", [(1, []), (2, [(0, 1)]), (3, [(0, 1), (1, 2), (2, 0)])])
    def test_ring_pairs(self, n, expected):
        assert qlayer.entangling_pairs(n) == expected

    def test_unknown_options(self):
        with pytest.raises(ConfigurationError):
            build_circuit(np.zeros(4), VariationalParams.zeros(1, 4), entanglement="star")
        with pytest.raises(ConfigurationError):
            evaluate(np.zeros(4), VariationalParams.zeros(1, 4), embedding_order="xzy")


class TestEvaluate:
    def test_identity_circuit(self):
        np.testing.assert_array_equal(evaluate(np.zeros(4), VariationalParams.zeros(2, 4)), [1, 1, 1, 1])

    def test_single_qubit_closed_form(self):
        p = VariationalParams.zeros(0, 1)
        for x in np.linspace(-np.pi, np.pi, 25):
            # oracle: 2x2 matrix algebra with independent exponentials
            psi = oracles.rotation("RZ", x) @ oracles.rotation("RY", x) @ oracles.rotation("RX", x) @ [1, 0]
            assert abs(abs(psi[0]) ** 2 - abs(psi[1]) ** 2 - np.cos(x) ** 2) < 1e-12
            assert abs(evaluate([x], p)[0] - np.cos(x) ** 2) < 1e-12

    @pytest.mark.parametrize("x, expected", [(np.pi / 2, 0.0), (np.pi, 1.0)])
    def test_single_qubit_spot_values(self, x, expected):
        assert evaluate([x], VariationalParams.zeros(0, 1))[0] == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("order", sorted(qlayer.EMBEDDING_ORDERS))
    @pytest.mark.parametrize("entanglement", qlayer.ENTANGLEMENTS)
    def test_matches_dense_oracle(self, order, entanglement):
        rng = np.random.default_rng(5)
        for _ in range(5):
            x, p = random_setup(rng)
            got = evaluate(x, p, embedding_order=order, entanglement=entanglement)
            want = reference_outputs(x, p, embedding_order=order, entanglement=entanglement)
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_embedding_orders_follow_their_formulas(self):
        rng = np.random.default_rng(8)
        x = rng.uniform(-np.pi, np.pi, 4)
        p = VariationalParams.zeros(0, 4)
        kron = lambda ops: oracles.embed_single(ops[0], 0, 1) if len(ops) == 1 else np.kron(ops[-1], kron(ops[:-1]))
        R = oracles.rotation
        zero = np.zeros(16)
        zero[0] = 1
        product = kron([R("RZ", v) @ R("RY", v) @ R("RX", v) for v in x]) @ zero
        expanded = kron([R("RX", v) @ R("RY", v) @ R("RZ", v) for v in x]) @ zero
        for order, psi in (("xyz", product), ("zyx", expanded)):
            want = [oracles.expect_z_dense(psi, q, 4) for q in range(4)]
            np.testing.assert_allclose(evaluate(x, p, embedding_order=order), want, atol=1e-12)

    def test_embedding_block_independent_of_params(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-np.pi, np.pi, 4)
        a = build_circuit(x, VariationalParams.random(rng, 2, 4))
        b = build_circuit(x, VariationalParams.random(rng, 2, 4))
        assert a.gates[:12] == b.gates[:12]
        np.testing.assert_allclose(
            evaluate(x, VariationalParams.zeros(0, 4)), reference_outputs(x, VariationalParams.zeros(0, 4)), atol=1e-12
        )

    def test_ring_differs_from_chain(self):
        rng = np.random.default_rng(0)
        diffs = []
        for _ in range(10):
            x, p = random_setup(rng)
            diffs.append(np.max(np.abs(evaluate(x, p) - evaluate(x, p, entanglement="chain"))))
        assert max(diffs) > 1e-6

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        x, p = random_setup(rng)
        assert evaluate(x, p).tobytes() == evaluate(x, p).tobytes()

    @pytest.mark.parametrize(
        "perm",
        [[1, 2, 3, 0], [3, 0, 1, 2], [3, 2, 1, 0]],
        ids=["shift", "shift-back", "reflect"],
    )
    def test_ring_symmetric_relabeling_permutes_outputs(self, perm):
        # perm[q] is the new label of qubit q; each perm maps ring edges onto ring edges
        rng = np.random.default_rng(6)
        x, p = random_setup(rng)
        new_x = np.empty(4)
        new_angles = np.empty_like(p.angles)
        for q, nq in enumerate(perm):
            new_x[nq] = x[q]
            new_angles[:, nq] = p.angles[:, q]
        out = evaluate(x, p)
        new_out = evaluate(new_x, VariationalParams(new_angles))
        np.testing.assert_allclose(new_out[perm], out, atol=1e-12)

    def test_batch_broadcasting(self):
        rng = np.random.default_rng(9)
        xs = rng.uniform(-np.pi, np.pi, (6, 4))
        p = VariationalParams.random(rng, 2, 4)
        batch = qlayer.evaluate_batch(xs, p.flat, 2)
        np.testing.assert_allclose(batch, [evaluate(x, p) for x in xs], atol=1e-14)
        with pytest.raises(ShapeError):
            qlayer.evaluate_batch(xs, np.zeros((4, 24)), 2)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 5),
    st.integers(0, 3),
    st.sampled_from(qlayer.ENTANGLEMENTS),
    st.integers(0, 2**32 - 1),
)
def test_fused_batch_path_matches_gate_by_gate(n, layers, entanglement, seed):
    rng = np.random.default_rng(seed)
    x, p = random_setup(rng, layers, n)
    circuit = build_circuit(x, p, entanglement=entanglement)
    state = sim.run_gates(circuit.gates, n)
    expected = [sim.expectation_z(state, q) for q in range(n)]
    got = evaluate(x, p, entanglement=entanglement)
    np.testing.assert_allclose(got, expected, atol=1e-12)
    assert np.all(np.abs(got) <= 1.0)


class TestRenderAscii:
    def test_single_qubit_embedding(self):
        text = render_ascii(build_circuit([0.5], VariationalParams.zeros(0, 1)))
        lines = text.splitlines()
        assert len(lines) == 1
        assert lines[0] == "q0: -RX(x0)--RY(x0)--RZ(x0)--"

    def test_paper_circuit(self):
        text = render_ascii(build_circuit(np.zeros(4), VariationalParams.zeros(2, 4)))
        lines = text.splitlines()
        wires = lines[::2]
        assert [w[:3] for w in wires] == ["q0:", "q1:", "q2:", "q3:"]
        assert len(lines) == 7
        assert text.count("*") == 16
        assert "RZ(w23)" in wires[3] and "RX(w0)" in wires[0]
        # the wraparound CZ(3,0) draws a connector straight through wires 1 and 2
        wrap_cols = [
            i
            for i in range(min(len(w) for w in wires))
            if wires[0][i] == "*" and wires[3][i] == "*" and wires[1][i] == "|" and wires[2][i] == "|"
        ]
        assert len(wrap_cols) == 2

    def test_empty_circuit(self):
        assert render_ascii(QuantumCircuit(2, ())) == "q0: -\n\nq1: -\n"

    def test_stable(self):
        c = build_circuit(np.ones(4), VariationalParams.zeros(2, 4))
        assert render_ascii(c) == render_ascii(build_circuit(np.ones(4), VariationalParams.zeros(2, 4)))
