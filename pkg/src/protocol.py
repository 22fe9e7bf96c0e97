"""
Steps 1-7 of the bidirectional teleportation protocol, plus Charlie's release
(Steps 6-1/6-2) for the controlled variant.

The module-level step functions are the building blocks; BQTSimulator walks
them as a step machine for one sampled branch, and src.oracle reuses the same
functions with forced outcomes to enumerate every branch.
"""
from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional

import numpy as np

from src.layout import ConfigError, ProtocolConfig, RegisterLayout, build_layout
from src.protocol_utils import (
    FIDELITY_THRESHOLD,
    SCHMIDT_TOLERANCE,
    BranchReport,
    CorrectionPlan,
    CorrectionRules,
    ProtocolFailure,
    Steps,
)
from src.register_definitions import Basis
from src.rng import SeededRNG
from src.statevec import (
    NORM_TOLERANCE,
    MeasurementRecord,
    StateVector,
    StateVectorError,
    apply_cnot,
    apply_h,
    apply_x,
    apply_z,
    basis_state,
    fidelity,
    measure,
    project,
    random_state,
    split_product,
    tensor,
)

logger = logging.getLogger(__name__)


def outcome_bits(records: tuple[MeasurementRecord, ...]) -> str:
    return "".join(str(record.outcome) for record in records)


def _expect_size(state: StateVector, expected: int, stage: str):
    if state.num_qubits != expected:
        raise StateVectorError(f"{stage} expects a {expected}-qubit register, got {state.num_qubits}")


def _apply_plan(state: StateVector, plan: CorrectionPlan) -> StateVector:
    for q in plan.x_targets:
        state = apply_x(state, q)
    for q in plan.z_targets:
        state = apply_z(state, q)
    return state


def _measure_in_place(state: StateVector, position: int, qubits: tuple[int, ...], basis: Basis,
                      rng: SeededRNG) -> tuple[tuple[MeasurementRecord, ...], StateVector]:
    # Each measured qubit leaves the register, so the next one slides into `position`.
    records = []
    for q in qubits:
        record, state = measure(state, position, basis, rng.random())
        records.append(replace(record, qubit=q))
        logger.debug("Measured %s qubit %d -> %d (p=%.6f)", basis.value, q, record.outcome, record.probability)
    return tuple(records), state


def _project_in_place(state: StateVector, position: int, basis: Basis,
                      outcomes: str) -> tuple[float, Optional[StateVector]]:
    probability = 1.0
    for bit in outcomes:
        p, state = project(state, position, basis, int(bit))
        if state is None:
            return 0.0, None
        probability *= p
    return probability, state


#################################
# Inputs
#################################

def ghz_state(num_qubits: int, alpha0: complex, alpha1: complex) -> StateVector:
    """alpha0|0...0> + alpha1|1...1>, normalized."""
    if num_qubits < 1:
        raise StateVectorError("a GHZ-form state needs at least one qubit")
    amplitudes = np.zeros(1 << num_qubits, dtype=np.complex128)
    amplitudes[0] = alpha0
    amplitudes[-1] += alpha1
    norm = np.linalg.norm(amplitudes)
    if norm == 0.0:
        raise StateVectorError("alpha0 and alpha1 cannot both vanish")
    return StateVector(num_qubits, amplitudes / norm)


def _random_block_state(num_qubits: int, entangled: bool, seed: int) -> StateVector:
    if entangled:
        pair = random_state(1, seed).amplitudes
        return ghz_state(num_qubits, pair[0], pair[1])
    return random_state(num_qubits, seed)


def random_inputs(cfg: ProtocolConfig, seed: int) -> tuple[StateVector, StateVector]:
    """Seeded (phi_a, phi_b); an entangled side gets a random GHZ-form state."""
    rng = SeededRNG(seed)
    phi_a = _random_block_state(cfg.n, cfg.alice_entangled, rng.fork_seed())
    phi_b = _random_block_state(cfg.m, cfg.bob_entangled, rng.fork_seed())
    return phi_a, phi_b


def check_inputs(layout: RegisterLayout, phi_a: StateVector, phi_b: StateVector):
    cfg = layout.config
    if phi_a.num_qubits != cfg.n or phi_b.num_qubits != cfg.m:
        raise StateVectorError(
            f"inputs must hold n={cfg.n} and m={cfg.m} qubits, "
            f"got {phi_a.num_qubits} and {phi_b.num_qubits}"
        )
    for name, phi in (("phi_a", phi_a), ("phi_b", phi_b)):
        if abs(phi.norm() ** 2 - 1.0) > NORM_TOLERANCE:
            raise StateVectorError(f"{name} is not normalized (norm {phi.norm():.12f})")


#################################
# Steps
#################################

def channel_from_layout(layout: RegisterLayout) -> StateVector:
    state = basis_state(layout.num_channel_qubits, 0)
    for q in layout.hadamard_targets:
        state = apply_h(state, q)
    for control, target in layout.channel_cnots:
        state = apply_cnot(state, control, target)
    return state


def build_channel(cfg: ProtocolConfig) -> StateVector:
    """Step 1: the channel over main, charlie and control qubits."""
    return channel_from_layout(build_layout(cfg))


def attach_inputs(channel: StateVector, phi_a: StateVector, phi_b: StateVector) -> StateVector:
    return tensor(tensor(channel, phi_a), phi_b)


def step2_entangle(state: StateVector, layout: RegisterLayout) -> StateVector:
    _expect_size(state, layout.total_qubits, "step 2")
    for control, target in layout.step2_cnots:
        state = apply_cnot(state, control, target)
    return state


def step3_measure_controls(state: StateVector, layout: RegisterLayout,
                           rng: SeededRNG) -> tuple[tuple[MeasurementRecord, ...], StateVector]:
    _expect_size(state, layout.total_qubits, "step 3")
    return _measure_in_place(state, layout.ancilla_start, layout.controls, Basis.Z, rng)


def step3_project_controls(state: StateVector, layout: RegisterLayout,
                           outcomes: str) -> tuple[float, Optional[StateVector]]:
    """Step 3 with forced outcomes, one bit per control qubit in register order."""
    _expect_size(state, layout.total_qubits, "step 3")
    if len(outcomes) != len(layout.controls):
        raise ValueError(f"expected {len(layout.controls)} control outcomes, got {outcomes!r}")
    return _project_in_place(state, layout.ancilla_start, Basis.Z, outcomes)


def step4_x_corrections(state: StateVector, layout: RegisterLayout,
                        outcomes: str) -> tuple[StateVector, CorrectionPlan]:
    _expect_size(state, layout.total_qubits - len(layout.controls), "step 4")
    plan = CorrectionRules(layout).x_plan(outcomes)
    return _apply_plan(state, plan), plan


def step5_measure_sending(state: StateVector, layout: RegisterLayout,
                          rng: SeededRNG) -> tuple[tuple[MeasurementRecord, ...], StateVector]:
    _expect_size(state, layout.total_qubits - len(layout.controls), "step 5")
    return _measure_in_place(state, layout.ancilla_start, layout.sending, Basis.X, rng)


def step5_project_sending(state: StateVector, layout: RegisterLayout,
                          outcomes: str) -> tuple[float, Optional[StateVector]]:
    """Step 5 with forced outcomes, 1 meaning |->."""
    _expect_size(state, layout.total_qubits - len(layout.controls), "step 5")
    if len(outcomes) != len(layout.sending):
        raise ValueError(f"expected {len(layout.sending)} sending outcomes, got {outcomes!r}")
    return _project_in_place(state, layout.ancilla_start, Basis.X, outcomes)


def step6_z_corrections(state: StateVector, layout: RegisterLayout,
                        outcomes: str) -> tuple[StateVector, CorrectionPlan]:
    _expect_size(state, layout.ancilla_start, "step 6")
    plan = CorrectionRules(layout).z_plan(outcomes)
    return _apply_plan(state, plan), plan


def _require_charlie(layout: RegisterLayout) -> int:
    if layout.charlie_index is None:
        raise ConfigError("charlie_release needs a controlled config")
    return layout.charlie_index


def charlie_correct(state: StateVector, layout: RegisterLayout,
                    charlie_outcome: int) -> tuple[StateVector, CorrectionPlan]:
    """Step 6-2 on the main register left after Charlie's measurement."""
    _expect_size(state, len(layout.main), "step 6-2")
    plan = CorrectionRules(layout).charlie_plan(charlie_outcome)
    return _apply_plan(state, plan), plan


def charlie_release(state: StateVector, layout: RegisterLayout,
                    rng: SeededRNG) -> tuple[MeasurementRecord, StateVector, CorrectionPlan]:
    charlie = _require_charlie(layout)
    _expect_size(state, layout.ancilla_start, "step 6-1")
    record, state = measure(state, charlie, Basis.X, rng.random())
    logger.debug("Charlie measured X -> %d", record.outcome)
    state, plan = charlie_correct(state, layout, record.outcome)
    return record, state, plan


def charlie_project(state: StateVector, layout: RegisterLayout,
                    charlie_outcome: int) -> tuple[float, Optional[StateVector]]:
    charlie = _require_charlie(layout)
    _expect_size(state, layout.ancilla_start, "step 6-1")
    return project(state, charlie, Basis.X, charlie_outcome)


def step7_extract(state: StateVector, layout: RegisterLayout,
                  audit: Optional[dict] = None) -> tuple[StateVector, StateVector]:
    """Returns (bob_received, alice_received), each with a canonical global phase."""
    _expect_size(state, len(layout.main), "step 7")
    singular_value, bob_received, alice_received = split_product(state, len(layout.main_bob))
    if abs(singular_value - 1.0) > SCHMIDT_TOLERANCE:
        raise ProtocolFailure(
            f"main register does not factor across the b|a cut (top singular value {singular_value:.12f})",
            audit,
        )
    return bob_received, alice_received


def finish_branch(state: StateVector, layout: RegisterLayout, phi_a: StateVector, phi_b: StateVector,
                  control_outcomes: str, sending_outcomes: str, charlie_outcome: Optional[int],
                  probability: float, corrections: CorrectionPlan,
                  measurements: tuple[MeasurementRecord, ...] = ()) -> BranchReport:
    """Step 7 plus the fidelity bookkeeping shared by sampled and enumerated branches."""
    audit = {
        "config": layout.config,
        "control_outcomes": control_outcomes,
        "sending_outcomes": sending_outcomes,
        "charlie_outcome": charlie_outcome,
        "corrections": corrections,
        "measurements": measurements,
    }
    bob_received, alice_received = step7_extract(state, layout, audit)
    return BranchReport(
        control_outcomes=control_outcomes,
        sending_outcomes=sending_outcomes,
        charlie_outcome=charlie_outcome,
        probability=probability,
        corrections=corrections,
        alice_received=alice_received,
        bob_received=bob_received,
        fidelity_alice=fidelity(alice_received, phi_b),
        fidelity_bob=fidelity(bob_received, phi_a),
        measurements=measurements,
    )


#################################
# Step machine
#################################

class BQTSimulator:
    def __init__(self, cfg: ProtocolConfig):
        self.FIDELITY_THRESHOLD = FIDELITY_THRESHOLD  # Both directions must reach this to succeed

        self.layout = build_layout(cfg)
        self.rng = SeededRNG(cfg.seed)
        self.reset()

    def reset(self):
        """Return to Step 1. The RNG stream is not rewound, so the next run samples a fresh branch."""
        self.step = Steps.CHANNEL
        self.state: Optional[StateVector] = None

        # Audit trail, filled as the steps run
        self.control_records: tuple[MeasurementRecord, ...] = ()
        self.sending_records: tuple[MeasurementRecord, ...] = ()
        self.charlie_record: Optional[MeasurementRecord] = None
        self.corrections = CorrectionPlan()

    @property
    def measurements(self) -> tuple[MeasurementRecord, ...]:
        charlie = (self.charlie_record,) if self.charlie_record else ()
        return self.control_records + self.sending_records + charlie

    @property
    def probability(self) -> float:
        probability = 1.0
        for record in self.measurements:
            probability *= record.probability
        return probability

    def run(self, phi_a: StateVector, phi_b: StateVector) -> BranchReport:
        """
        Walk the steps for one sampled branch:
        1. Build the channel and append the sending registers.
        2. Entangle sending and control qubits.
        3.-4. Z-measure the controls, announce, flip main qubits with X.
        5.-6. X-measure the sending qubits, announce, fix phases with Z.
        6-1/6-2. Charlie measures and releases (controlled configs only).
        7. Split the main register into the two received states.
        """
        check_inputs(self.layout, phi_a, phi_b)
        self.reset()
        report = None
        prev_step = None
        while self.step != Steps.FINISHED:
            if self.step != prev_step:
                logger.info("Step changed to -> %s", self.step.name)
                prev_step = self.step

            if self.step == Steps.CHANNEL:
                self.state = channel_from_layout(self.layout)
                self.step = Steps.INPUTS

            elif self.step == Steps.INPUTS:
                self.state = attach_inputs(self.state, phi_a, phi_b)
                self.step = Steps.ENTANGLE

            elif self.step == Steps.ENTANGLE:
                self.state = step2_entangle(self.state, self.layout)
                self.step = Steps.MEASURE_CONTROLS

            elif self.step == Steps.MEASURE_CONTROLS:
                self.control_records, self.state = step3_measure_controls(self.state, self.layout, self.rng)
                self.step = Steps.X_CORRECTIONS

            elif self.step == Steps.X_CORRECTIONS:
                self.state, plan = step4_x_corrections(self.state, self.layout, outcome_bits(self.control_records))
                self.corrections = self.corrections.merged(plan)
                self.step = Steps.MEASURE_SENDING

            elif self.step == Steps.MEASURE_SENDING:
                self.sending_records, self.state = step5_measure_sending(self.state, self.layout, self.rng)
                self.step = Steps.Z_CORRECTIONS

            elif self.step == Steps.Z_CORRECTIONS:
                self.state, plan = step6_z_corrections(self.state, self.layout, outcome_bits(self.sending_records))
                self.corrections = self.corrections.merged(plan)
                self.step = Steps.CHARLIE_RELEASE if self.layout.config.controlled else Steps.EXTRACT

            elif self.step == Steps.CHARLIE_RELEASE:
                record, self.state, plan = charlie_release(self.state, self.layout, self.rng)
                self.charlie_record = replace(record, qubit=self.layout.charlie_index)
                self.corrections = self.corrections.merged(plan)
                self.step = Steps.EXTRACT

            elif self.step == Steps.EXTRACT:
                report = finish_branch(
                    self.state, self.layout, phi_a, phi_b,
                    control_outcomes=outcome_bits(self.control_records),
                    sending_outcomes=outcome_bits(self.sending_records),
                    charlie_outcome=self.charlie_record.outcome if self.charlie_record else None,
                    probability=self.probability,
                    corrections=self.corrections,
                    measurements=self.measurements,
                )
                self.step = Steps.FINISHED

        logger.info("Branch %s finished, fidelities alice=%.12f bob=%.12f",
                    report.outcome_key, report.fidelity_alice, report.fidelity_bob)
        return report


def run(cfg: ProtocolConfig, phi_a: StateVector, phi_b: StateVector) -> BranchReport:
    return BQTSimulator(cfg).run(phi_a, phi_b)
