from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, auto
from typing import TYPE_CHECKING, Optional

from src.statevec import MeasurementRecord, StateVector

if TYPE_CHECKING:
    from src.layout import RegisterLayout

FIDELITY_THRESHOLD = 1.0 - 1e-10  # A direction counts as teleported at or above this fidelity
SCHMIDT_TOLERANCE = 1e-9          # Max gap between the top singular value and 1 for a product state


class Steps(Enum):
    """
    Enum class to define the steps of one protocol run, in execution order.
    """
    CHANNEL = auto()           # Step 1: Hadamards and CNOTs build the channel
    INPUTS = auto()            # Sending registers appended to the channel
    ENTANGLE = auto()          # Step 2: sending qubits drive CNOTs onto the control qubits
    MEASURE_CONTROLS = auto()  # Step 3: Z-measure every control qubit
    X_CORRECTIONS = auto()     # Step 4
    MEASURE_SENDING = auto()   # Step 5: X-measure every sending qubit
    Z_CORRECTIONS = auto()     # Step 6
    CHARLIE_RELEASE = auto()   # Steps 6-1/6-2, controlled runs only
    EXTRACT = auto()           # Step 7: split the main register into the two outputs
    FINISHED = auto()


class ProtocolFailure(RuntimeError):
    """
    The residual main register did not factor into Bob's and Alice's blocks.
    `audit` holds everything measured and applied on the failing branch.
    """
    def __init__(self, message: str, audit: Optional[dict] = None):
        super().__init__(message)
        self.audit = audit or {}


@dataclass(frozen=True)
class CorrectionPlan:
    x_targets: tuple[int, ...] = ()
    z_targets: tuple[int, ...] = ()

    def merged(self, other: CorrectionPlan) -> CorrectionPlan:
        return CorrectionPlan(self.x_targets + other.x_targets, self.z_targets + other.z_targets)

    def operators(self, main: tuple[int, ...]) -> str:
        """
        Operator per main qubit, written the way the correction tables write them,
        e.g. "IIX" for I⊗I⊗X on (b0)(b1)(a0).
        """
        symbols = []
        for q in main:
            symbol = ("X" if q in self.x_targets else "") + ("Z" if q in self.z_targets else "")
            symbols.append(symbol or "I")
        return "".join(symbols)


@dataclass(frozen=True, eq=False)
class BranchReport:
    control_outcomes: str               # Z outcomes of the control qubits, register order
    sending_outcomes: str               # X outcomes of the sending qubits, 1 means |->
    charlie_outcome: Optional[int]      # X outcome of Charlie's qubit, None when uncontrolled
    probability: float
    corrections: CorrectionPlan
    alice_received: StateVector         # m qubits, should match phi_b
    bob_received: StateVector           # n qubits, should match phi_a
    fidelity_alice: float
    fidelity_bob: float
    measurements: tuple[MeasurementRecord, ...] = field(default=())

    @property
    def outcome_key(self) -> str:
        charlie = "" if self.charlie_outcome is None else str(self.charlie_outcome)
        return f"{self.control_outcomes}|{self.sending_outcomes}|{charlie}"

    def succeeded(self, threshold: float = FIDELITY_THRESHOLD) -> bool:
        return self.fidelity_alice >= threshold and self.fidelity_bob >= threshold


class CorrectionRules:
    """
    Turns announced measurement bits into Pauli corrections on the main qubits.
    Kept apart from the step functions so the tables can be checked against it directly.
    """
    def __init__(self, layout: "RegisterLayout"):
        self.layout = layout

    def x_plan(self, control_outcomes: str) -> CorrectionPlan:
        """A control qubit reading 1 flips every main qubit it mirrors."""
        controls = self.layout.controls
        if len(control_outcomes) != len(controls):
            raise ValueError(f"expected {len(controls)} control outcomes, got {control_outcomes!r}")
        targets = []
        for control, bit in zip(controls, control_outcomes):
            if bit == "1":
                targets.extend(self.layout.mirror_map[control])
        return CorrectionPlan(x_targets=tuple(targets))

    def z_plan(self, sending_outcomes: str) -> CorrectionPlan:
        """
        Plain block: a |-> on sending qubit i puts Z on main qubit i of the block.
        Entangled block: odd number of |-> over the block puts Z on its first main qubit.
        """
        sending = self.layout.sending
        if len(sending_outcomes) != len(sending):
            raise ValueError(f"expected {len(sending)} sending outcomes, got {sending_outcomes!r}")
        bits = dict(zip(sending, sending_outcomes))
        targets = []
        for block in self.layout.blocks:
            block_bits = [bits[q] for q in block.sending]
            if block.entangled:
                if block_bits.count("1") % 2:
                    targets.append(block.main[0])
            else:
                targets.extend(main for main, bit in zip(block.main, block_bits) if bit == "1")
        return CorrectionPlan(z_targets=tuple(targets))

    def charlie_plan(self, charlie_outcome: int) -> CorrectionPlan:
        """
        On |->, Z on the first main qubit mirrored by each control qubit feeding Charlie.
        """
        mask = self.layout.config.charlie_mask
        if charlie_outcome == 0 or mask is None:
            return CorrectionPlan()
        targets = tuple(self.layout.mirror_map[control][0]
                        for control, bit in zip(self.layout.controls, mask) if bit == "1")
        return CorrectionPlan(z_targets=targets)
