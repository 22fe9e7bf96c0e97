import math

import numpy as np
import pytest

from src.register_definitions import Basis
from src.statevec import (
    NormalizationError,
    QsvFormatError,
    StateVector,
    StateVectorError,
    apply_cnot,
    apply_h,
    apply_x,
    apply_z,
    basis_state,
    canonical_phase,
    fidelity,
    from_amplitudes,
    from_qsv,
    marginal_probabilities,
    measure,
    permute_qubits,
    project,
    random_state,
    read_qsv,
    split_product,
    tensor,
    to_qsv,
    write_qsv,
)
from tests.helpers_test import assert_states_close, ket_state

PLUS = from_amplitudes([1, 1], normalize=True)
MINUS = from_amplitudes([1, -1], normalize=True)


#################################
# Construction
#################################

@pytest.mark.parametrize("num_qubits, index, expected", [
    (1, 0, [1, 0]),
    (2, 3, [0, 0, 0, 1]),
    (3, 0, [1, 0, 0, 0, 0, 0, 0, 0]),
])
def test_basis_state(num_qubits, index, expected):
    assert np.array_equal(basis_state(num_qubits, index).amplitudes, np.array(expected, dtype=complex))


@pytest.mark.parametrize("num_qubits, index", [(1, 2), (2, -1), (0, 1)])
def test_basis_state_out_of_range(num_qubits, index):
    with pytest.raises(StateVectorError):
        basis_state(num_qubits, index)


def test_amplitudes_are_read_only():
    state = basis_state(2, 1)
    with pytest.raises(ValueError):
        state.amplitudes[0] = 1.0


def test_wrong_amplitude_count_rejected():
    with pytest.raises(StateVectorError):
        StateVector(2, np.zeros(3))


def test_ket_terms_are_big_endian():
    """Qubit 0 is the leftmost ket symbol."""
    state = ket_state({"10": 1})
    assert state.amplitudes[2] == 1
    assert marginal_probabilities(state, 0) == (0.0, 1.0)


def test_random_state_is_deterministic_and_normalized():
    a = random_state(4, 1234)
    b = random_state(4, 1234)
    assert np.array_equal(a.amplitudes, b.amplitudes)
    for seed in range(1000):
        assert abs(random_state(3, seed).norm() - 1.0) <= 1e-12


def test_random_state_empty_register():
    state = random_state(0, 99)
    assert state.num_qubits == 0
    assert np.array_equal(state.amplitudes, np.ones(1, dtype=complex))


#################################
# Gates
#################################

def test_hadamard_on_zero():
    assert_states_close(apply_h(basis_state(1, 0), 0), PLUS)


def test_hadamard_on_three_qubits_is_uniform():
    state = basis_state(3, 0)
    for q in range(3):
        state = apply_h(state, q)
    assert np.allclose(state.amplitudes, 1 / math.sqrt(8), rtol=0.0, atol=1e-12)


def test_pauli_x_and_z():
    assert_states_close(apply_x(basis_state(1, 0), 0), basis_state(1, 1))
    assert_states_close(apply_z(MINUS, 0), PLUS)


def test_cnot_flips_target():
    assert_states_close(apply_cnot(ket_state({"10": 1}), 0, 1), ket_state({"11": 1}))
    assert_states_close(apply_cnot(ket_state({"01": 1}), 1, 0), ket_state({"11": 1}))
    assert_states_close(apply_cnot(ket_state({"00": 1}), 0, 1), ket_state({"00": 1}))


def test_cnot_same_qubit_rejected():
    with pytest.raises(StateVectorError):
        apply_cnot(basis_state(2, 0), 1, 1)


@pytest.mark.parametrize("q", [-1, 3])
def test_gate_index_out_of_range(q):
    with pytest.raises(StateVectorError):
        apply_h(basis_state(3, 0), q)


@pytest.mark.parametrize("seed", range(5))
def test_involutions_and_norm(seed):
    state = random_state(4, seed)
    for q in range(4):
        for gate in (apply_h, apply_x, apply_z):
            once = gate(state, q)
            assert abs(once.norm() ** 2 - 1.0) <= 1e-12
            assert_states_close(gate(once, q), state)
    assert_states_close(apply_cnot(apply_cnot(state, 0, 3), 0, 3), state)
    assert_states_close(apply_cnot(apply_cnot(state, 2, 1), 2, 1), state)


def test_x_and_z_anticommute():
    state = random_state(3, 5)
    zx = apply_z(apply_x(state, 1), 1)
    xz = apply_x(apply_z(state, 1), 1)
    assert np.allclose(zx.amplitudes, -xz.amplitudes, rtol=0.0, atol=1e-12)


def test_tensor_order_and_norm():
    assert_states_close(tensor(basis_state(1, 0), basis_state(1, 1)), ket_state({"01": 1}))
    a, b = random_state(2, 1), random_state(1, 2)
    assert abs(tensor(a, b).norm() - a.norm() * b.norm()) <= 1e-12


def test_fidelity():
    psi = random_state(3, 11)
    rotated = StateVector(3, psi.amplitudes * np.exp(1j * 0.731))
    assert fidelity(psi, psi) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(psi, rotated) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(basis_state(1, 0), basis_state(1, 1)) == 0.0
    with pytest.raises(StateVectorError):
        fidelity(basis_state(1, 0), basis_state(2, 0))


#################################
# Measurement
#################################

def test_measure_zero_state():
    record, post = measure(basis_state(1, 0), 0, Basis.Z, 0.999)
    assert (record.outcome, record.probability) == (0, 1.0)
    assert post.num_qubits == 0


def test_x_measure_minus():
    record, _ = measure(MINUS, 0, Basis.X, 0.0)
    assert record.outcome == 1
    assert record.probability == pytest.approx(1.0, abs=1e-12)


def test_project_plus_on_z():
    probability, post = project(PLUS, 0, Basis.Z, 0)
    assert probability == pytest.approx(0.5, abs=1e-12)
    assert post.num_qubits == 0


def test_project_empty_branch():
    assert project(basis_state(2, 0), 1, Basis.Z, 1) == (0.0, None)


def test_project_channel_on_last_control():
    """Half of the 3+3 qubit channel has c_b0 = 1: the four terms with a0 = 1."""
    channel = ket_state({f"{x:03b}{x:03b}": 1 for x in range(8)}, normalize=True)
    probability, post = project(channel, 5, Basis.Z, 1)
    assert probability == pytest.approx(0.5, abs=1e-12)
    assert post.num_qubits == 5
    assert len(post.support()) == 4
    assert all(index & 0b100 for index in post.support())


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("basis", [Basis.Z, Basis.X])
def test_measurement_completeness_and_consistency(seed, basis):
    state = random_state(3, seed)
    for q in range(3):
        p0, post0 = project(state, q, basis, 0)
        p1, _ = project(state, q, basis, 1)
        assert p0 + p1 == pytest.approx(1.0, abs=1e-12)
        record, post = measure(state, q, basis, p0 / 2)
        assert record.outcome == 0
        assert_states_close(post, post0)
        record, _ = measure(state, q, basis, (1.0 + p0) / 2)
        assert record.outcome == 1


def test_measure_rejects_unnormalized_state():
    with pytest.raises(NormalizationError):
        measure(StateVector(1, np.array([1.0, 1.0])), 0, Basis.Z, 0.5)


def test_measure_rejects_bad_draw():
    with pytest.raises(StateVectorError):
        measure(PLUS, 0, Basis.Z, 1.0)


#################################
# Relabeling and factorization
#################################

def test_permute_qubits():
    state = ket_state({"110": 1})
    assert_states_close(permute_qubits(state, [2, 0, 1]), ket_state({"011": 1}))
    with pytest.raises(StateVectorError):
        permute_qubits(state, [0, 0, 1])


def test_split_product_recovers_factors():
    left, right = random_state(2, 3), random_state(1, 4)
    singular_value, found_left, found_right = split_product(tensor(left, right), 2)
    assert singular_value == pytest.approx(1.0, abs=1e-12)
    assert fidelity(found_left, left) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(found_right, right) == pytest.approx(1.0, abs=1e-12)


def test_split_product_on_bell_state():
    bell = ket_state({"00": 1, "11": 1}, normalize=True)
    singular_value, _, _ = split_product(bell, 1)
    assert singular_value == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_canonical_phase():
    amplitudes = canonical_phase(np.array([0.1j, -0.5j, 0.5]))
    assert amplitudes[1] == pytest.approx(0.5)


#################################
# .qsv format
#################################

def test_qsv_text():
    text = to_qsv(ket_state({"01": 1, "10": -1}, normalize=True))
    lines = text.splitlines()
    assert lines[0] == "qsv 1 2"
    assert [line.split()[0] for line in lines[1:]] == ["1", "2"]
    assert float(lines[2].split()[1]) == pytest.approx(-1 / math.sqrt(2), abs=1e-16)


def test_qsv_file_round_trip(tmp_path):
    state = random_state(3, 21)
    write_qsv(tmp_path / "state.qsv", state)
    assert np.array_equal(read_qsv(tmp_path / "state.qsv").amplitudes, state.amplitudes)


def test_qsv_comments_and_blank_lines():
    state = from_qsv("# two-qubit Bell state\n\nqsv 1 2\n0 0.5 0\n# middle comment\n3 0.5 0\n")
    assert state.num_qubits == 2
    assert list(state.support()) == [0, 3]


@pytest.mark.parametrize("text", [
    "",
    "qsv 2 1\n0 1 0\n",
    "qsv 1 1\n1 1 0\n0 0 0\n",
    "qsv 1 1\n2 1 0\n",
    "qsv 1 1\n0 one 0\n",
    "qsv 1 -1\n",
    "qsv 1 70\n",
])
def test_qsv_malformed(text):
    with pytest.raises(QsvFormatError):
        from_qsv(text)
