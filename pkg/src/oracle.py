"""
Verification engine: exhaustive branch enumeration over forced outcomes,
product-state checks and channel equivalence up to qubit relabeling.
"""
from __future__ import annotations

import asyncio
import itertools
import logging
import time
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from src.layout import ProtocolConfig, RegisterLayout, build_layout
from src.protocol import (
    attach_inputs,
    channel_from_layout,
    charlie_correct,
    charlie_project,
    check_inputs,
    finish_branch,
    step2_entangle,
    step3_project_controls,
    step4_x_corrections,
    step5_project_sending,
    step6_z_corrections,
)
from src.protocol_utils import FIDELITY_THRESHOLD, SCHMIDT_TOLERANCE, BranchReport, ProtocolFailure
from src.register_definitions import PAULI_SEARCH_ORDER, Pauli
from src.statevec import (
    AMPLITUDE_TOLERANCE,
    QSV_MAX_QUBITS,
    StateVector,
    StateVectorError,
    apply_x,
    apply_z,
    fidelity,
    marginal_probabilities,
    permute_qubits,
    tensor,
)

logger = logging.getLogger(__name__)

MAX_QUBITS = QSV_MAX_QUBITS          # Largest register verify_all_branches will enumerate
MAX_PAULI_SEARCH_QUBITS = 8         # Equivalence search bound with local Paulis
MAX_PERMUTATION_SEARCH_QUBITS = 12  # Equivalence search bound, permutations only
EQUIVALENCE_TOLERANCE = 1e-10       # Elementwise tolerance for a witness
SIGNATURE_TOLERANCE = 1e-9          # Marginal signatures closer than this are treated as equal


class ResourceLimitError(ValueError):
    """A request exceeds the oracle's size bounds. The message carries both sizes."""


#################################
# Branch enumeration
#################################

@dataclass(frozen=True, eq=False)
class VerificationReport:
    config: ProtocolConfig
    num_branches: int                                # every outcome combination, empty ones included
    min_fidelity: float                              # over non-empty branches, both directions
    failing_branches: tuple[tuple[str, float], ...]  # (outcome key, min of the two fidelities)
    elapsed: float                                   # seconds
    empty_branches: tuple[str, ...] = ()
    branches: tuple[BranchReport, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.failing_branches and self.min_fidelity >= FIDELITY_THRESHOLD


@dataclass
class _PrefixResult:
    branches: list[BranchReport]
    failing: list[tuple[str, float]]
    empty: list[str]


def _bitstrings(width: int) -> list[str]:
    return ["".join(bits) for bits in itertools.product("01", repeat=width)]


def _charlie_outcomes(layout: RegisterLayout) -> list[Optional[int]]:
    return [0, 1] if layout.config.controlled else [None]


def _branch_key(control: str, sending: str, charlie: Optional[int]) -> str:
    return f"{control}|{sending}|{'' if charlie is None else charlie}"


def _check_size(layout: RegisterLayout):
    if layout.total_qubits > MAX_QUBITS:
        raise ResourceLimitError(
            f"{layout.total_qubits} qubits requested, branch enumeration is limited to {MAX_QUBITS}"
        )


def _prepare(cfg: ProtocolConfig, phi_a: StateVector, phi_b: StateVector) -> tuple[RegisterLayout, StateVector]:
    layout = build_layout(cfg)
    _check_size(layout)
    check_inputs(layout, phi_a, phi_b)
    state = step2_entangle(attach_inputs(channel_from_layout(layout), phi_a, phi_b), layout)
    return layout, state


def _enumerate_prefix(layout: RegisterLayout, entangled: StateVector, phi_a: StateVector, phi_b: StateVector,
                      control: str) -> _PrefixResult:
    """Every branch that starts with the given control outcomes."""
    result = _PrefixResult([], [], [])
    sending_keys = _bitstrings(len(layout.sending))
    charlie_keys = _charlie_outcomes(layout)

    p_control, after_controls = step3_project_controls(entangled, layout, control)
    if after_controls is None:
        result.empty.extend(_branch_key(control, s, c) for s in sending_keys for c in charlie_keys)
        return result
    after_x, x_plan = step4_x_corrections(after_controls, layout, control)

    for sending in sending_keys:
        p_sending, after_sending = step5_project_sending(after_x, layout, sending)
        if after_sending is None:
            result.empty.extend(_branch_key(control, sending, c) for c in charlie_keys)
            continue
        after_z, z_plan = step6_z_corrections(after_sending, layout, sending)

        for charlie in charlie_keys:
            key = _branch_key(control, sending, charlie)
            probability = p_control * p_sending
            state, plan = after_z, x_plan.merged(z_plan)
            if charlie is not None:
                p_charlie, state = charlie_project(state, layout, charlie)
                if state is None:
                    result.empty.append(key)
                    continue
                probability *= p_charlie
                state, charlie_plan = charlie_correct(state, layout, charlie)
                plan = plan.merged(charlie_plan)

            try:
                branch = finish_branch(state, layout, phi_a, phi_b, control, sending, charlie, probability, plan)
            except ProtocolFailure:
                # Score the whole main register against the ideal swapped pair.
                score = fidelity(state, tensor(phi_a, phi_b))
                logger.warning("Branch %s left an entangled main register (fidelity %.6f)", key, score)
                result.failing.append((key, score))
                continue
            result.branches.append(branch)
            if not branch.succeeded():
                result.failing.append((key, min(branch.fidelity_alice, branch.fidelity_bob)))
    return result


def _merge(cfg: ProtocolConfig, layout: RegisterLayout, results: Iterable[_PrefixResult],
           started: float) -> VerificationReport:
    branches, failing, empty = [], [], []
    for result in results:
        branches.extend(result.branches)
        failing.extend(result.failing)
        empty.extend(result.empty)
    branches.sort(key=lambda branch: branch.outcome_key)
    failing.sort()
    empty.sort()

    fidelities = [min(b.fidelity_alice, b.fidelity_bob) for b in branches] + [score for _, score in failing]
    report = VerificationReport(
        config=cfg,
        num_branches=1 << (len(layout.controls) + len(layout.sending) + len(layout.charlie)),
        min_fidelity=min(fidelities) if fidelities else 0.0,
        failing_branches=tuple(failing),
        elapsed=time.perf_counter() - started,
        empty_branches=tuple(empty),
        branches=tuple(branches),
    )
    logger.info("Verified %s: %d branches (%d empty), min fidelity %.12f, %d failing",
                cfg, report.num_branches, len(report.empty_branches), report.min_fidelity,
                len(report.failing_branches))
    return report


def verify_all_branches(cfg: ProtocolConfig, phi_a: StateVector, phi_b: StateVector) -> VerificationReport:
    started = time.perf_counter()
    layout, entangled = _prepare(cfg, phi_a, phi_b)
    results = [_enumerate_prefix(layout, entangled, phi_a, phi_b, control)
               for control in _bitstrings(len(layout.controls))]
    return _merge(cfg, layout, results, started)


async def verify_all_branches_async(cfg: ProtocolConfig, phi_a: StateVector,
                                    phi_b: StateVector) -> VerificationReport:
    """
    Same report as verify_all_branches. Each control-outcome prefix runs in
    its own worker thread; the merge sorts by outcome key.
    """
    started = time.perf_counter()
    layout, entangled = _prepare(cfg, phi_a, phi_b)
    async with asyncio.TaskGroup() as tg:
        tasks = [
            tg.create_task(asyncio.to_thread(_enumerate_prefix, layout, entangled, phi_a, phi_b, control))
            for control in _bitstrings(len(layout.controls))
        ]
    return _merge(cfg, layout, (task.result() for task in tasks), started)


#################################
# Structure checks
#################################

def schmidt_product_check(state: StateVector, cut: Sequence[int]) -> bool:
    """True iff `state` factors into (qubits in cut) ⊗ (the rest)."""
    left = sorted(set(cut))
    if any(not 0 <= q < state.num_qubits for q in left):
        raise StateVectorError(f"cut {list(cut)} outside a {state.num_qubits}-qubit register")
    right = [q for q in range(state.num_qubits) if q not in left]
    matrix = permute_qubits(state, left + right).amplitudes.reshape((1 << len(left), 1 << len(right)))
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    return abs(float(singular_values[0]) - 1.0) <= SCHMIDT_TOLERANCE


def _bit(index: int, q: int, num_qubits: int) -> int:
    return (index >> (num_qubits - 1 - q)) & 1


def channel_structure_check(cfg: ProtocolConfig, channel: StateVector) -> bool:
    """
    Every basis term of the channel must mirror main bits onto control bits
    (and carry the masked control parity on Charlie), with equal amplitudes
    spread over all free main bits.
    """
    layout = build_layout(cfg)
    if channel.num_qubits != layout.num_channel_qubits:
        return False
    free_bits = sum(1 if block.entangled else len(block.main) for block in layout.blocks)
    support = channel.support(AMPLITUDE_TOLERANCE)
    if len(support) != 1 << free_bits:
        return False
    expected = 1.0 / np.sqrt(len(support))
    if not np.allclose(channel.amplitudes[support], expected, rtol=0.0, atol=AMPLITUDE_TOLERANCE):
        return False

    k = channel.num_qubits
    for index in support:
        bits = {q: _bit(int(index), q, k) for q in range(k)}
        for block in layout.blocks:
            if block.entangled:
                if len({bits[q] for q in block.main}) != 1 or bits[block.controls[0]] != bits[block.main[0]]:
                    return False
            elif any(bits[c] != bits[q] for q, c in zip(block.main, block.controls)):
                return False
        if cfg.controlled:
            parity = sum(bits[c] for c, bit in zip(layout.controls, cfg.charlie_mask) if bit == "1") % 2
            if bits[layout.charlie_index] != parity:
                return False
    return True


#################################
# Equivalence up to relabeling
#################################

@dataclass(frozen=True)
class EquivalenceResult:
    equivalent: bool
    permutation: Optional[tuple[int, ...]] = None   # position j holds qubit permutation[j] of A
    local_paulis: Optional[tuple[Pauli, ...]] = None  # per position, applied after the permutation
    phase: Optional[complex] = None


def apply_local_paulis(state: StateVector, paulis: Sequence[Pauli]) -> StateVector:
    """Apply X^flip·Z^phase on every qubit; Z acts first."""
    if len(paulis) != state.num_qubits:
        raise StateVectorError(f"{len(paulis)} Paulis for a {state.num_qubits}-qubit state")
    for q, pauli in enumerate(paulis):
        if pauli.phases:
            state = apply_z(state, q)
        if pauli.flips:
            state = apply_x(state, q)
    return state


def apply_witness(state: StateVector, result: EquivalenceResult) -> StateVector:
    if not result.equivalent:
        raise ValueError("no witness to apply, states were not equivalent")
    state = permute_qubits(state, result.permutation)
    if result.local_paulis is not None:
        state = apply_local_paulis(state, result.local_paulis)
    return StateVector(state.num_qubits, state.amplitudes * result.phase)


def _signatures(state: StateVector, with_paulis: bool) -> list[tuple[float, float]]:
    signatures = [marginal_probabilities(state, q) for q in range(state.num_qubits)]
    # An X flip swaps p0 and p1, so only the unordered pair survives it.
    return [tuple(sorted(s)) for s in signatures] if with_paulis else signatures


def _pair_tables(state: StateVector, with_paulis: bool) -> np.ndarray:
    """Two-qubit joint distributions, flattened (p00, p01, p10, p11); sorted when flips are allowed."""
    k = state.num_qubits
    probabilities = (np.abs(state.amplitudes) ** 2).reshape([2] * k)
    tables = np.zeros((k, k, 4))
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            others = tuple(axis for axis in range(k) if axis not in (i, j))
            joint = np.sum(probabilities, axis=others)
            if i > j:
                joint = joint.T
            tables[i, j] = np.sort(joint.reshape(-1)) if with_paulis else joint.reshape(-1)
    return tables


def _phase_between(candidate: np.ndarray, target: np.ndarray) -> Optional[complex]:
    pivot = int(np.argmax(np.abs(target)))
    if abs(candidate[pivot]) <= EQUIVALENCE_TOLERANCE:
        return None
    return complex(target[pivot] / candidate[pivot])


def _match_permutation_only(permuted: StateVector, b: StateVector) -> Optional[complex]:
    phase = _phase_between(permuted.amplitudes, b.amplitudes)
    if phase is None:
        return None
    if np.max(np.abs(permuted.amplitudes * phase - b.amplitudes)) > EQUIVALENCE_TOLERANCE:
        return None
    return phase


def _pauli_rank(flips: int, phases: int, k: int) -> tuple[int, ...]:
    # qubit 0 most significant
    return tuple(
        PAULI_SEARCH_ORDER.index(Pauli.from_bits(_bit(flips, q, k), _bit(phases, q, k))) for q in range(k)
    )


def _match_with_paulis(permuted: StateVector, b: StateVector) -> Optional[tuple[tuple[Pauli, ...], complex]]:
    """
    Smallest Pauli string P (and phase) with phase·P|permuted> = |b>.
    P = X^v Z^z sends |x> to (-1)^(z·x) |x xor v>, so v is fixed by the supports
    and z is searched over all 2^k vectors at once.
    """
    k = permuted.num_qubits
    dim = 1 << k
    source, target = permuted.amplitudes, b.amplitudes
    source_support = np.flatnonzero(np.abs(source) > EQUIVALENCE_TOLERANCE)
    target_support = np.flatnonzero(np.abs(target) > EQUIVALENCE_TOLERANCE)
    if len(source_support) != len(target_support) or len(source_support) == 0:
        return None
    target_set = set(target_support.tolist())

    indices = np.arange(dim)
    z_vectors = np.arange(dim)
    best = None
    for t in target_support:
        v = int(source_support[0]) ^ int(t)
        if {int(s) ^ v for s in source_support} != target_set:
            continue
        moved = source[indices ^ v]  # moved[y] = source[y xor v]
        inputs = target_support ^ v  # the x each target index came from
        # parity[z, s] = popcount(z & x_s) mod 2
        overlaps = z_vectors[:, None] & inputs[None, :]
        parity = np.zeros(overlaps.shape, dtype=np.int64)
        for q in range(k):
            parity ^= (overlaps >> q) & 1
        signs = 1 - 2 * parity
        pivot = int(np.argmax(np.abs(target[target_support])))
        phases = target[target_support[pivot]] / (signs[:, pivot] * moved[target_support[pivot]])
        predicted = phases[:, None] * signs * moved[target_support][None, :]
        errors = np.max(np.abs(predicted - target[target_support][None, :]), axis=1)
        for z in np.flatnonzero(errors <= EQUIVALENCE_TOLERANCE):
            rank = _pauli_rank(v, int(z), k)
            if best is None or rank < best[0]:
                best = (rank, v, int(z), complex(phases[z]))
    if best is None:
        return None
    _, v, z, phase = best
    paulis = tuple(Pauli.from_bits(_bit(v, q, k), _bit(z, q, k)) for q in range(k))
    return paulis, phase


def _permutations(a_signatures, b_signatures, a_pairs, b_pairs, k):
    """Lexicographic permutations whose single and pairwise signatures agree with b's."""
    order: list[int] = []
    used = [False] * k

    def compatible(candidate: int) -> bool:
        j = len(order)
        if not np.allclose(a_signatures[candidate], b_signatures[j], rtol=0.0, atol=SIGNATURE_TOLERANCE):
            return False
        return all(
            np.allclose(a_pairs[order[i], candidate], b_pairs[i, j], rtol=0.0, atol=SIGNATURE_TOLERANCE)
            for i in range(j)
        )

    def extend():
        if len(order) == k:
            yield tuple(order)
            return
        for candidate in range(k):
            if used[candidate] or not compatible(candidate):
                continue
            used[candidate] = True
            order.append(candidate)
            yield from extend()
            order.pop()
            used[candidate] = False

    yield from extend()


def equivalent_up_to_relabeling(a: StateVector, b: StateVector, allow_local_paulis: bool = False) -> EquivalenceResult:
    """
    Search a qubit relabeling (and, optionally, local Paulis) plus a global phase
    taking a to b. The first permutation in lexicographic order that admits a
    witness wins; within it the smallest Pauli string in I<X<Z<XZ order.
    """
    if a.num_qubits != b.num_qubits:
        raise StateVectorError(f"qubit-count mismatch: {a.num_qubits} vs {b.num_qubits}")
    k = a.num_qubits
    limit = MAX_PAULI_SEARCH_QUBITS if allow_local_paulis else MAX_PERMUTATION_SEARCH_QUBITS
    if k > limit:
        raise ResourceLimitError(f"{k} qubits requested, equivalence search is limited to {limit}")

    candidates = _permutations(
        _signatures(a, allow_local_paulis), _signatures(b, allow_local_paulis),
        _pair_tables(a, allow_local_paulis), _pair_tables(b, allow_local_paulis), k,
    )
    for order in candidates:
        permuted = permute_qubits(a, order)
        if allow_local_paulis:
            match = _match_with_paulis(permuted, b)
            if match is not None:
                paulis, phase = match
                logger.debug("Equivalent via %s with %s", order, "".join(p.value for p in paulis))
                return EquivalenceResult(True, order, paulis, phase)
        else:
            phase = _match_permutation_only(permuted, b)
            if phase is not None:
                logger.debug("Equivalent via %s", order)
                return EquivalenceResult(True, order, None, phase)
    return EquivalenceResult(False)
