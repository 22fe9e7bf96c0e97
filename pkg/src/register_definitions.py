from enum import Enum


class QubitRole(Enum):
    """
    Enum class to map every qubit of the global register to its role.
    The value is the ket label prefix used when the register is printed,
    so a layout can be read the same way the tables write it,
    e.g. (b0)(b1)(a0)(c_a0)(c_a1)(c_b0)(A0)(A1)(B0).
    """
    MAIN_BOB = "b"      # Main qubits that end up holding Alice's state (Bob's side)
    MAIN_ALICE = "a"    # Main qubits that end up holding Bob's state (Alice's side)
    CHARLIE = "C"       # Supervisor qubit, only present in the controlled variant
    CONTROL_A = "c_a"   # Control qubits mirroring main_bob, driven by Alice's sending qubits
    CONTROL_B = "c_b"   # Control qubits mirroring main_alice, driven by Bob's sending qubits
    SENDING_A = "A"     # Alice's unknown n-qubit input
    SENDING_B = "B"     # Bob's unknown m-qubit input


class Sender(Enum):
    """
    Owner of a sending register. Each sender has one block in the layout.
    """
    ALICE = "alice"
    BOB = "bob"


class Basis(Enum):
    """
    Single-qubit measurement bases. For X, outcome 0 is |+> and outcome 1 is |->.
    """
    Z = "Z"
    X = "X"


class Pauli(Enum):
    """
    Local Pauli labels used by the equivalence search, in search order.
    XZ means the matrix product X·Z (Z acts first).
    """
    I = "I"
    X = "X"
    Z = "Z"
    XZ = "XZ"

    @property
    def flips(self) -> int:
        return 1 if self in (Pauli.X, Pauli.XZ) else 0

    @property
    def phases(self) -> int:
        return 1 if self in (Pauli.Z, Pauli.XZ) else 0

    @classmethod
    def from_bits(cls, flip: int, phase: int) -> "Pauli":
        return _PAULI_FROM_BITS[(flip, phase)]


_PAULI_FROM_BITS = {
    (0, 0): Pauli.I,
    (1, 0): Pauli.X,
    (0, 1): Pauli.Z,
    (1, 1): Pauli.XZ,
}

# Ordering used for the deterministic witness search (I < X < Z < XZ).
PAULI_SEARCH_ORDER = (Pauli.I, Pauli.X, Pauli.Z, Pauli.XZ)
