#################################
# Collection of helper functions
# for testing the teleportation
# protocol and its oracle.
#################################

from pathlib import Path
from typing import Optional

import numpy as np

from src.layout import ProtocolConfig, RegisterLayout
from src.protocol import (
    attach_inputs,
    channel_from_layout,
    charlie_correct,
    charlie_project,
    step2_entangle,
    step3_project_controls,
    step4_x_corrections,
    step5_project_sending,
    step6_z_corrections,
)
from src.statevec import AMPLITUDE_TOLERANCE, StateVector, fidelity, from_amplitudes, from_ket_terms

DATA_DIR = Path(__file__).parent / "data"

# Fixed inputs of the worked example: Alice's two-qubit state and Bob's one-qubit state.
EXAMPLE_ALPHA = from_amplitudes([0.1 + 0.2j, 0.3 - 0.1j, -0.4 + 0.5j, 0.2 + 0.6j], normalize=True)
EXAMPLE_B = from_amplitudes([0.6 - 0.3j, -0.2 + 0.7j], normalize=True)

# Every protocol variant the exhaustive checks cover.
EXHAUSTIVE_CONFIGS = [
    ProtocolConfig(1, 1),
    ProtocolConfig(2, 1),
    ProtocolConfig(1, 2),
    ProtocolConfig(2, 2),
    ProtocolConfig(2, 1, alice_entangled=True),
    ProtocolConfig(2, 2, alice_entangled=True, bob_entangled=True),
    ProtocolConfig(2, 1, controlled=True, charlie_mask="001"),
    ProtocolConfig(2, 1, alice_entangled=True, controlled=True, charlie_mask="01"),
]


def ket_state(terms: dict[str, complex], normalize: bool = False) -> StateVector:
    return from_ket_terms(terms, normalize=normalize)


def example_terms(alpha: StateVector, b: StateVector) -> dict[tuple[str, str], complex]:
    """Coefficients alpha_x * b_y keyed by (x, y) bitstrings."""
    return {
        (format(x, "02b"), format(y, "01b")): alpha.amplitudes[x] * b.amplitudes[y]
        for x in range(4) for y in range(2)
    }


def xor_bits(a: str, b: str) -> str:
    return "".join("1" if p != q else "0" for p, q in zip(a, b))


def assert_states_close(actual: StateVector, expected: StateVector, atol: float = AMPLITUDE_TOLERANCE):
    """Elementwise comparison, global phase included."""
    assert actual.num_qubits == expected.num_qubits, (
        f"expected {expected.num_qubits} qubits, got {actual.num_qubits}"
    )
    worst = float(np.max(np.abs(actual.amplitudes - expected.amplitudes)))
    assert worst <= atol, f"amplitudes differ by {worst:.3e}"


def assert_same_state(actual: StateVector, expected: StateVector, threshold: float = 1.0 - 1e-10):
    """Equality up to a global phase."""
    assert fidelity(actual, expected) >= threshold, f"fidelity {fidelity(actual, expected):.12f}"


def entangled_system(layout: RegisterLayout, phi_a: StateVector, phi_b: StateVector) -> StateVector:
    """State right after Step 2."""
    return step2_entangle(attach_inputs(channel_from_layout(layout), phi_a, phi_b), layout)


def force_branch(layout: RegisterLayout, phi_a: StateVector, phi_b: StateVector, controls: str,
                 sending: Optional[str] = None, charlie: Optional[int] = None) -> tuple[float, StateVector]:
    """
    Drive one branch with forced outcomes and return (probability, state).
    Stops after Step 4 when `sending` is None, after Step 6 when `charlie` is None.
    """
    probability, state = step3_project_controls(entangled_system(layout, phi_a, phi_b), layout, controls)
    assert state is not None, f"control outcomes {controls} have zero probability"
    state, _ = step4_x_corrections(state, layout, controls)
    if sending is None:
        return probability, state

    p_sending, state = step5_project_sending(state, layout, sending)
    assert state is not None, f"sending outcomes {sending} have zero probability"
    state, _ = step6_z_corrections(state, layout, sending)
    probability *= p_sending
    if charlie is None:
        return probability, state

    p_charlie, state = charlie_project(state, layout, charlie)
    assert state is not None, f"charlie outcome {charlie} has zero probability"
    state, _ = charlie_correct(state, layout, charlie)
    return probability * p_charlie, state
