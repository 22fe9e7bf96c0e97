"""
Structured report documents written by the CLI. Every document is a JSON
key-value tree with sorted keys, so identical runs give identical bytes.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Any, Optional

from src.layout import ProtocolConfig, build_layout
from src.oracle import EquivalenceResult, VerificationReport
from src.protocol_utils import BranchReport
from src.register_definitions import Basis
from src.statevec import StateVector, from_amplitudes

TOOL_VERSION = "1.0.0"


def canonical_json(document: dict[str, Any]) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class SparseState:
    """A StateVector as .qsv-style (index, re, im) rows."""
    num_qubits: int
    amplitudes: tuple[tuple[int, float, float], ...]

    @classmethod
    def from_state(cls, state: StateVector) -> SparseState:
        rows = tuple((int(i), float(state.amplitudes[i].real), float(state.amplitudes[i].imag))
                     for i in state.support())
        return cls(state.num_qubits, rows)

    def to_state(self) -> StateVector:
        amplitudes = [0j] * (1 << self.num_qubits)
        for index, re, im in self.amplitudes:
            amplitudes[index] = complex(re, im)
        return from_amplitudes(amplitudes)

    def to_document(self) -> dict[str, Any]:
        return {"num_qubits": self.num_qubits, "amplitudes": [list(row) for row in self.amplitudes]}

    @classmethod
    def from_document(cls, document: dict[str, Any]) -> SparseState:
        rows = tuple((int(i), float(re), float(im)) for i, re, im in document["amplitudes"])
        return cls(int(document["num_qubits"]), rows)


def config_document(cfg: ProtocolConfig) -> dict[str, Any]:
    return asdict(cfg)


def config_from_document(document: dict[str, Any]) -> ProtocolConfig:
    return ProtocolConfig(**document)


@dataclass(frozen=True)
class RunReport:
    tool_version: str
    config: ProtocolConfig
    phi_a: SparseState
    phi_b: SparseState
    control_outcomes: str
    sending_outcomes: str
    charlie_outcome: Optional[int]
    probability: float
    corrections: str                                           # operator per main qubit, e.g. "IXZ"
    x_targets: tuple[int, ...]
    z_targets: tuple[int, ...]
    measurements: tuple[tuple[int, str, int, float], ...]      # (qubit, basis, outcome, probability)
    alice_received: SparseState
    bob_received: SparseState
    fidelity_alice: float
    fidelity_bob: float
    succeeded: bool
    duration: Optional[float] = None                           # seconds, only with --timing

    @classmethod
    def from_branch(cls, cfg: ProtocolConfig, phi_a: StateVector, phi_b: StateVector, branch: BranchReport,
                    duration: Optional[float] = None) -> RunReport:
        main = build_layout(cfg).main
        return cls(
            tool_version=TOOL_VERSION,
            config=cfg,
            phi_a=SparseState.from_state(phi_a),
            phi_b=SparseState.from_state(phi_b),
            control_outcomes=branch.control_outcomes,
            sending_outcomes=branch.sending_outcomes,
            charlie_outcome=branch.charlie_outcome,
            probability=branch.probability,
            corrections=branch.corrections.operators(main),
            x_targets=branch.corrections.x_targets,
            z_targets=branch.corrections.z_targets,
            measurements=tuple((r.qubit, r.basis.value, r.outcome, r.probability) for r in branch.measurements),
            alice_received=SparseState.from_state(branch.alice_received),
            bob_received=SparseState.from_state(branch.bob_received),
            fidelity_alice=branch.fidelity_alice,
            fidelity_bob=branch.fidelity_bob,
            succeeded=branch.succeeded(),
            duration=duration,
        )

    def to_document(self) -> dict[str, Any]:
        document = {
            "tool_version": self.tool_version,
            "config": config_document(self.config),
            "inputs": {"phi_a": self.phi_a.to_document(), "phi_b": self.phi_b.to_document()},
            "branch": {
                "control_outcomes": self.control_outcomes,
                "sending_outcomes": self.sending_outcomes,
                "charlie_outcome": self.charlie_outcome,
                "probability": self.probability,
                "corrections": self.corrections,
                "x_targets": list(self.x_targets),
                "z_targets": list(self.z_targets),
                "measurements": [
                    {"qubit": q, "basis": basis, "outcome": outcome, "probability": p}
                    for q, basis, outcome, p in self.measurements
                ],
            },
            "outputs": {
                "alice_received": self.alice_received.to_document(),
                "bob_received": self.bob_received.to_document(),
                "fidelity_alice": self.fidelity_alice,
                "fidelity_bob": self.fidelity_bob,
            },
            "succeeded": self.succeeded,
        }
        if self.duration is not None:
            document["duration"] = self.duration
        return document

    @classmethod
    def from_document(cls, document: dict[str, Any]) -> RunReport:
        branch, outputs = document["branch"], document["outputs"]
        return cls(
            tool_version=document["tool_version"],
            config=config_from_document(document["config"]),
            phi_a=SparseState.from_document(document["inputs"]["phi_a"]),
            phi_b=SparseState.from_document(document["inputs"]["phi_b"]),
            control_outcomes=branch["control_outcomes"],
            sending_outcomes=branch["sending_outcomes"],
            charlie_outcome=branch["charlie_outcome"],
            probability=branch["probability"],
            corrections=branch["corrections"],
            x_targets=tuple(branch["x_targets"]),
            z_targets=tuple(branch["z_targets"]),
            measurements=tuple(
                (m["qubit"], Basis(m["basis"]).value, m["outcome"], m["probability"])
                for m in branch["measurements"]
            ),
            alice_received=SparseState.from_document(outputs["alice_received"]),
            bob_received=SparseState.from_document(outputs["bob_received"]),
            fidelity_alice=outputs["fidelity_alice"],
            fidelity_bob=outputs["fidelity_bob"],
            succeeded=document["succeeded"],
            duration=document.get("duration"),
        )

    def to_json(self) -> str:
        return canonical_json(self.to_document())

    @classmethod
    def from_json(cls, text: str) -> RunReport:
        return cls.from_document(json.loads(text))


def verification_document(report: VerificationReport, seed: Optional[int], timing: bool = False) -> dict[str, Any]:
    """One trial of `verify`; `seed` is its input-sampling seed, None for inputs read from files."""
    document = {
        "input_seed": seed,
        "num_branches": report.num_branches,
        "min_fidelity": report.min_fidelity,
        "failing_branches": [[key, score] for key, score in report.failing_branches],
        "empty_branches": list(report.empty_branches),
        "passed": report.passed,
    }
    if timing:
        document["elapsed"] = report.elapsed
    return document


def verification_suite_document(cfg: ProtocolConfig, trials: list[dict[str, Any]]) -> dict[str, Any]:
    return {
        "tool_version": TOOL_VERSION,
        "config": config_document(cfg),
        "trials": trials,
        "passed": all(trial["passed"] for trial in trials),
    }


def equivalence_document(result: EquivalenceResult, num_qubits: tuple[int, int],
                         allow_local_paulis: bool) -> dict[str, Any]:
    return {
        "tool_version": TOOL_VERSION,
        "num_qubits": list(num_qubits),
        "allow_local_paulis": allow_local_paulis,
        "equivalent": result.equivalent,
        "permutation": None if result.permutation is None else list(result.permutation),
        "local_paulis": None if result.local_paulis is None else [p.value for p in result.local_paulis],
        "phase": None if result.phase is None else [result.phase.real, result.phase.imag],
    }


def mismatch_document(num_qubits: tuple[int, int], allow_local_paulis: bool) -> dict[str, Any]:
    return {
        "tool_version": TOOL_VERSION,
        "num_qubits": list(num_qubits),
        "allow_local_paulis": allow_local_paulis,
        "equivalent": False,
        "error": f"qubit-count mismatch: {num_qubits[0]} vs {num_qubits[1]}",
    }
