"""
Dense state-vector register used by every other module.

Qubit 0 is the LEFTMOST symbol of a ket: |q0 q1 ... q(k-1)> maps to the basis
index q0*2^(k-1) + ... + q(k-1). Every operation returns a new StateVector;
the amplitude array of a constructed StateVector is read-only.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from numba import njit

from src.register_definitions import Basis

logger = logging.getLogger(__name__)

AMPLITUDE_TOLERANCE = 1e-12  # Elementwise absolute tolerance for amplitude comparisons
NORM_TOLERANCE = 1e-9        # Max |norm^2 - 1| accepted by measure/project
ZERO_PROBABILITY = 1e-14     # Branches at or below this probability are empty
QSV_ZERO_CUTOFF = 1e-15      # Amplitudes below this magnitude are not written to .qsv
QSV_VERSION = 1
QSV_MAX_QUBITS = 22          # Largest register a .qsv file may declare
SQRT2_INV = 1.0 / math.sqrt(2.0)


class StateVectorError(ValueError):
    """Domain error: bad qubit index, bad size, invalid gate arguments."""


class NormalizationError(StateVectorError):
    """Contract error: a measurement was requested on an unnormalized state."""


class QsvFormatError(StateVectorError):
    """Malformed .qsv text."""


@dataclass(frozen=True, eq=False)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.num_qubits < 0:
            raise StateVectorError(f"num_qubits must be >= 0, got {self.num_qubits}")
        amplitudes = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amplitudes.shape[0] != 1 << self.num_qubits:
            raise StateVectorError(
                f"expected {1 << self.num_qubits} amplitudes for {self.num_qubits} qubits, "
                f"got {amplitudes.shape[0]}"
            )
        amplitudes.flags.writeable = False
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def support(self, cutoff: float = QSV_ZERO_CUTOFF) -> np.ndarray:
        """Basis indices holding an amplitude above `cutoff`, ascending."""
        return np.flatnonzero(np.abs(self.amplitudes) > cutoff)

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits}, nonzero={len(self.support())})"


@dataclass(frozen=True)
class MeasurementRecord:
    """
    One single-qubit measurement. `qubit` is the index the caller measured;
    the protocol rewrites it to the global layout index for its audit trail.
    """
    qubit: int
    basis: Basis
    outcome: int
    probability: float


#################################
# Kernels. Input is read-only, each
# kernel fills the `out` buffer the
# caller allocated.
#################################

@njit(nogil=True, cache=False)
def _hadamard_kernel(amplitudes, out, shift):
    stride = 1 << shift
    for base in range(0, amplitudes.shape[0], stride << 1):
        for i in range(base, base + stride):
            a = amplitudes[i]
            b = amplitudes[i + stride]
            out[i] = (a + b) * SQRT2_INV
            out[i + stride] = (a - b) * SQRT2_INV


@njit(nogil=True, cache=False)
def _pauli_x_kernel(amplitudes, out, shift):
    stride = 1 << shift
    for base in range(0, amplitudes.shape[0], stride << 1):
        for i in range(base, base + stride):
            out[i] = amplitudes[i + stride]
            out[i + stride] = amplitudes[i]


@njit(nogil=True, cache=False)
def _pauli_z_kernel(amplitudes, out, shift):
    stride = 1 << shift
    for base in range(0, amplitudes.shape[0], stride << 1):
        for i in range(base, base + stride):
            out[i] = amplitudes[i]
            out[i + stride] = -amplitudes[i + stride]


@njit(nogil=True, cache=False)
def _cnot_kernel(amplitudes, out, control_shift, target_shift):
    control_mask = 1 << control_shift
    target_mask = 1 << target_shift
    for i in range(amplitudes.shape[0]):
        if (i & control_mask) == 0:
            out[i] = amplitudes[i]
        elif (i & target_mask) == 0:
            out[i] = amplitudes[i | target_mask]
        else:
            out[i] = amplitudes[i & ~target_mask]


def _run_kernel(kernel, state: StateVector, *shifts: int) -> StateVector:
    out = np.empty(state.dim, dtype=np.complex128)
    kernel(state.amplitudes, out, *shifts)
    return StateVector(state.num_qubits, out)


def _check_qubit(state: StateVector, q: int) -> int:
    if not isinstance(q, (int, np.integer)) or not 0 <= q < state.num_qubits:
        raise StateVectorError(f"qubit index {q} out of range for {state.num_qubits} qubits")
    return int(q)


def _shift(state: StateVector, q: int) -> int:
    # Big-endian: qubit 0 is the most significant bit.
    return state.num_qubits - 1 - q


#################################
# Construction
#################################

def basis_state(num_qubits: int, index: int) -> StateVector:
    if num_qubits < 0 or not 0 <= index < 1 << num_qubits:
        raise StateVectorError(f"basis index {index} out of range for {num_qubits} qubits")
    amplitudes = np.zeros(1 << num_qubits, dtype=np.complex128)
    amplitudes[index] = 1.0
    return StateVector(num_qubits, amplitudes)


def from_amplitudes(amplitudes: Sequence[complex] | np.ndarray, normalize: bool = False) -> StateVector:
    amplitudes = np.array(amplitudes, dtype=np.complex128).reshape(-1)
    num_qubits = int(amplitudes.shape[0]).bit_length() - 1
    if amplitudes.shape[0] == 0 or 1 << num_qubits != amplitudes.shape[0]:
        raise StateVectorError(f"amplitude count {amplitudes.shape[0]} is not a power of two")
    if normalize:
        norm = np.linalg.norm(amplitudes)
        if norm == 0.0:
            raise StateVectorError("cannot normalize the zero vector")
        amplitudes = amplitudes / norm
    return StateVector(num_qubits, amplitudes)


def from_ket_terms(terms: Mapping[str, complex], normalize: bool = True) -> StateVector:
    """
    Build a state from ket strings, e.g. {"000": 1, "111": 1} for a GHZ state.
    Repeated kets accumulate.
    """
    if not terms:
        raise StateVectorError("at least one ket term is required")
    widths = {len(ket) for ket in terms}
    if len(widths) != 1:
        raise StateVectorError(f"ket terms have mixed widths {sorted(widths)}")
    num_qubits = widths.pop()
    amplitudes = np.zeros(1 << num_qubits, dtype=np.complex128)
    for ket, coefficient in terms.items():
        if set(ket) - {"0", "1"}:
            raise StateVectorError(f"ket {ket!r} is not a bitstring")
        amplitudes[int(ket, 2) if ket else 0] += coefficient
    if normalize:
        return from_amplitudes(amplitudes, normalize=True)
    return StateVector(num_qubits, amplitudes)


def random_state(num_qubits: int, seed: int) -> StateVector:
    """Complex-Gaussian amplitudes, normalized. Same seed, same bits."""
    if num_qubits == 0:
        return StateVector(0, np.ones(1, dtype=np.complex128))
    generator = np.random.Generator(np.random.PCG64(seed))
    dim = 1 << num_qubits
    amplitudes = generator.standard_normal(dim) + 1j * generator.standard_normal(dim)
    return StateVector(num_qubits, amplitudes / np.linalg.norm(amplitudes))


#################################
# Gates
#################################

def apply_h(state: StateVector, q: int) -> StateVector:
    q = _check_qubit(state, q)
    return _run_kernel(_hadamard_kernel, state, _shift(state, q))


def apply_x(state: StateVector, q: int) -> StateVector:
    q = _check_qubit(state, q)
    return _run_kernel(_pauli_x_kernel, state, _shift(state, q))


def apply_z(state: StateVector, q: int) -> StateVector:
    q = _check_qubit(state, q)
    return _run_kernel(_pauli_z_kernel, state, _shift(state, q))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    control = _check_qubit(state, control)
    target = _check_qubit(state, target)
    if control == target:
        raise StateVectorError(f"CNOT control and target must differ, both are {control}")
    return _run_kernel(_cnot_kernel, state, _shift(state, control), _shift(state, target))


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Kronecker product, a's qubits first."""
    return StateVector(a.num_qubits + b.num_qubits, np.kron(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2, global phase drops out."""
    if a.num_qubits != b.num_qubits:
        raise StateVectorError(f"fidelity needs equal sizes, got {a.num_qubits} and {b.num_qubits}")
    overlap = np.vdot(a.amplitudes, b.amplitudes)
    return float(min(1.0, abs(overlap) ** 2))


#################################
# Measurement
#################################

def _split_on_qubit(state: StateVector, q: int) -> np.ndarray:
    # (high bits, qubit q, low bits)
    return state.amplitudes.reshape((1 << q, 2, 1 << (state.num_qubits - q - 1)))


def marginal_probabilities(state: StateVector, q: int) -> tuple[float, float]:
    q = _check_qubit(state, q)
    probabilities = np.sum(np.abs(_split_on_qubit(state, q)) ** 2, axis=(0, 2))
    return float(probabilities[0]), float(probabilities[1])


def _check_normalized(state: StateVector):
    deviation = abs(float(np.sum(np.abs(state.amplitudes) ** 2)) - 1.0)
    if deviation > NORM_TOLERANCE:
        raise NormalizationError(f"state norm deviates from 1 by {deviation:.3e}")


def project(state: StateVector, q: int, basis: Basis, outcome: int) -> tuple[float, Optional[StateVector]]:
    """
    Force `outcome` on qubit q. Returns the branch probability and the renormalized
    state with qubit q removed, or (0.0, None) for an empty branch.
    """
    q = _check_qubit(state, q)
    if outcome not in (0, 1):
        raise StateVectorError(f"outcome must be 0 or 1, got {outcome}")
    _check_normalized(state)
    if basis is Basis.X:
        state = apply_h(state, q)
    branch = _split_on_qubit(state, q)[:, outcome, :]
    probability = float(np.sum(np.abs(branch) ** 2))
    if probability <= ZERO_PROBABILITY:
        return 0.0, None
    return probability, StateVector(state.num_qubits - 1, branch.reshape(-1) / math.sqrt(probability))


def measure(state: StateVector, q: int, basis: Basis, rng_draw: float) -> tuple[MeasurementRecord, StateVector]:
    """Outcome 0 iff rng_draw < P(0). The register shrinks by the measured qubit."""
    if not 0.0 <= rng_draw < 1.0:
        raise StateVectorError(f"rng_draw must lie in [0, 1), got {rng_draw}")
    p0, post0 = project(state, q, basis, 0)
    if post0 is not None and rng_draw < p0:
        return MeasurementRecord(q, basis, 0, p0), post0
    p1, post1 = project(state, q, basis, 1)
    if post1 is None:
        # rounding put the draw past a probability-1 outcome
        return MeasurementRecord(q, basis, 0, p0), post0
    return MeasurementRecord(q, basis, 1, p1), post1


#################################
# Relabeling and factorization
#################################

def permute_qubits(state: StateVector, order: Sequence[int]) -> StateVector:
    """Position j of the result holds qubit order[j] of `state`."""
    if sorted(order) != list(range(state.num_qubits)):
        raise StateVectorError(f"{list(order)} is not a permutation of {state.num_qubits} qubits")
    if state.num_qubits == 0:
        return state
    amplitudes = np.transpose(state.amplitudes.reshape([2] * state.num_qubits), order)
    return StateVector(state.num_qubits, amplitudes.reshape(-1))


def canonical_phase(amplitudes: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the first largest-magnitude amplitude is real positive."""
    pivot = amplitudes[int(np.argmax(np.abs(amplitudes)))]
    if abs(pivot) == 0.0:
        return amplitudes
    return amplitudes * (abs(pivot) / pivot)


def split_product(state: StateVector, num_left: int) -> tuple[float, StateVector, StateVector]:
    """
    Best product approximation across the cut after the first `num_left` qubits.
    Returns (largest singular value, left factor, right factor); the state is a
    product exactly when the singular value equals its norm.
    """
    if not 0 <= num_left <= state.num_qubits:
        raise StateVectorError(f"cut {num_left} outside a {state.num_qubits}-qubit register")
    num_right = state.num_qubits - num_left
    matrix = state.amplitudes.reshape((1 << num_left, 1 << num_right))
    u, singular_values, vh = np.linalg.svd(matrix)
    left = StateVector(num_left, canonical_phase(u[:, 0]))
    right = StateVector(num_right, canonical_phase(vh[0, :]))
    return float(singular_values[0]), left, right


#################################
# .qsv text format
#################################

def to_qsv(state: StateVector) -> str:
    lines = [f"qsv {QSV_VERSION} {state.num_qubits}"]
    for index in state.support():
        amplitude = state.amplitudes[index]
        lines.append(f"{index} {amplitude.real:.17g} {amplitude.imag:.17g}")
    return "\n".join(lines) + "\n"


def from_qsv(text: str) -> StateVector:
    rows = [line.split() for line in text.splitlines()
            if line.strip() and not line.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 3 or rows[0][0] != "qsv":
        raise QsvFormatError("missing 'qsv <version> <num_qubits>' header")
    try:
        version, num_qubits = int(rows[0][1]), int(rows[0][2])
    except ValueError as exc:
        raise QsvFormatError(f"bad header {' '.join(rows[0])!r}") from exc
    if version != QSV_VERSION:
        raise QsvFormatError(f"unsupported qsv version {version}")
    if not 0 <= num_qubits <= QSV_MAX_QUBITS:
        raise QsvFormatError(f"num_qubits must lie in 0..{QSV_MAX_QUBITS} (got {num_qubits})")
    amplitudes = np.zeros(1 << num_qubits, dtype=np.complex128)
    previous = -1
    for row in rows[1:]:
        if len(row) != 3:
            raise QsvFormatError(f"expected '<index> <re> <im>', got {' '.join(row)!r}")
        try:
            index, re, im = int(row[0]), float(row[1]), float(row[2])
        except ValueError as exc:
            raise QsvFormatError(f"bad amplitude line {' '.join(row)!r}") from exc
        if not previous < index < amplitudes.shape[0]:
            raise QsvFormatError(f"index {index} out of order or out of range")
        amplitudes[index] = complex(re, im)
        previous = index
    return StateVector(num_qubits, amplitudes)


def write_qsv(path: str | Path, state: StateVector):
    Path(path).write_text(to_qsv(state))


def read_qsv(path: str | Path) -> StateVector:
    return from_qsv(Path(path).read_text())
