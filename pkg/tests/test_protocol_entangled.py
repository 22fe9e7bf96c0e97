import pytest

from src.layout import ProtocolConfig, build_layout
from src.protocol import build_channel, ghz_state, random_inputs, run, step7_extract
from src.protocol_utils import CorrectionRules
from src.statevec import StateVectorError, tensor
from tests.helpers_test import EXAMPLE_B, assert_same_state, assert_states_close, force_branch, ket_state

CFG = ProtocolConfig(2, 1, alice_entangled=True)
LAYOUT = build_layout(CFG)
GHZ_INPUT = ghz_state(2, 0.6, 0.8j)


def test_channel_matches_golden():
    # (b0)(b1)(a0)(c_a)(c_b)
    expected = ket_state({"00000": 1, "00101": 1, "11010": 1, "11111": 1}, normalize=True)
    assert_states_close(build_channel(CFG), expected)


def test_both_entangled_channel():
    # (b0)(b1)(a0)(a1)(c_a)(c_b)
    expected = ket_state({"000000": 1, "001101": 1, "110010": 1, "111111": 1}, normalize=True)
    assert_states_close(build_channel(ProtocolConfig(2, 2, alice_entangled=True, bob_entangled=True)), expected)


def test_ghz_state():
    assert_states_close(GHZ_INPUT, ket_state({"00": 0.6, "11": 0.8j}))
    with pytest.raises(StateVectorError):
        ghz_state(3, 0, 0)


def test_x_correction_flips_the_whole_block():
    assert CorrectionRules(LAYOUT).x_plan("10").operators(LAYOUT.main) == "XXI"
    assert CorrectionRules(LAYOUT).x_plan("01").operators(LAYOUT.main) == "IIX"


@pytest.mark.parametrize("sending, operators", [
    ("000", "III"),
    ("100", "ZII"),   # A0 = -, A1 = +, B0 = +
    ("010", "ZII"),
    ("110", "III"),   # even parity over the block
    ("111", "IIZ"),
    ("011", "ZIZ"),
])
def test_z_correction_uses_block_parity(sending, operators):
    assert CorrectionRules(LAYOUT).z_plan(sending).operators(LAYOUT.main) == operators


@pytest.mark.parametrize("controls", ["00", "01", "10", "11"])
@pytest.mark.parametrize("sending", ["000", "001", "010", "011", "100", "101", "110", "111"])
def test_every_branch_recovers_inputs(controls, sending):
    probability, state = force_branch(LAYOUT, GHZ_INPUT, EXAMPLE_B, controls, sending)
    assert probability == pytest.approx(1 / 32, abs=1e-12)
    assert_states_close(state, tensor(GHZ_INPUT, EXAMPLE_B))
    bob_received, alice_received = step7_extract(state, LAYOUT)
    assert_same_state(bob_received, GHZ_INPUT)
    assert_same_state(alice_received, EXAMPLE_B)


@pytest.mark.parametrize("seed", range(5))
def test_random_ghz_inputs_both_sides(seed):
    cfg = ProtocolConfig(3, 2, alice_entangled=True, bob_entangled=True, seed=seed)
    phi_a, phi_b = random_inputs(cfg, seed)
    assert set(phi_a.support()) <= {0, 7}
    assert set(phi_b.support()) <= {0, 3}
    report = run(cfg, phi_a, phi_b)
    assert report.succeeded()


def test_random_inputs_are_deterministic():
    cfg = ProtocolConfig(2, 2, alice_entangled=True)
    first, second = random_inputs(cfg, 17), random_inputs(cfg, 17)
    for a, b in zip(first, second):
        assert_states_close(a, b, atol=0.0)
    assert first[0].num_qubits == 2 and first[1].num_qubits == 2
