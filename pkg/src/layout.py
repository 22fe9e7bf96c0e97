"""
Register layout and wiring plan for one protocol instance.

The global register is always ordered
    main_bob | main_alice | charlie | control_a | control_b | sending_A | sending_B
so the step functions in src.protocol only orchestrate, they never decide
which qubit talks to which.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional

from src.register_definitions import QubitRole, Sender
from src.rng import SEED_BOUND

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """A ProtocolConfig clause is violated. The message names the clause."""


@dataclass(frozen=True)
class ProtocolConfig:
    n: int                              # Alice's sending-qubit count
    m: int                              # Bob's sending-qubit count
    alice_entangled: bool = False       # Alice sends a GHZ-form block a0|0...0> + a1|1...1>
    bob_entangled: bool = False         # Bob sends a GHZ-form block
    controlled: bool = False            # Charlie supervises the run
    charlie_mask: Optional[str] = None  # Bit i set: i-th control qubit (register order) feeds Charlie
    seed: int = 0                       # Drives every measurement draw of a sampled run

    @property
    def num_controls(self) -> int:
        alice = 1 if self.alice_entangled else self.n
        bob = 1 if self.bob_entangled else self.m
        return alice + bob

    def validate(self):
        if self.n < 0 or self.m < 0:
            raise ConfigError(f"n >= 0 and m >= 0 violated (n={self.n}, m={self.m})")
        if self.n + self.m < 1:
            raise ConfigError("n + m >= 1 violated: nothing to teleport")
        if self.alice_entangled and self.n < 2:
            raise ConfigError(f"alice_entangled requires n >= 2 (n={self.n})")
        if self.bob_entangled and self.m < 2:
            raise ConfigError(f"bob_entangled requires m >= 2 (m={self.m})")
        if not 0 <= self.seed < SEED_BOUND:
            raise ConfigError(f"seed must be an unsigned 64-bit integer (seed={self.seed})")
        if self.controlled != (self.charlie_mask is not None):
            raise ConfigError("charlie_mask must be present iff controlled")
        if self.controlled:
            mask = self.charlie_mask
            if len(mask) != self.num_controls or set(mask) - {"0", "1"}:
                raise ConfigError(
                    f"charlie_mask must be a bitstring over the {self.num_controls} control qubits "
                    f"(got {mask!r})"
                )
            if "1" not in mask:
                logger.warning("charlie_mask %s leaves Charlie decoupled from every control qubit", mask)


@dataclass(frozen=True)
class Block:
    """
    One sender's slice of the register. Alice's block pairs her sending qubits
    with Bob's main qubits (their destination), and the other way round.
    """
    sender: Sender
    entangled: bool
    main: tuple[int, ...]
    controls: tuple[int, ...]
    sending: tuple[int, ...]


@dataclass(frozen=True)
class RegisterLayout:
    config: ProtocolConfig
    main_bob: tuple[int, ...]
    main_alice: tuple[int, ...]
    charlie: tuple[int, ...]
    control_a: tuple[int, ...]
    control_b: tuple[int, ...]
    sending_a: tuple[int, ...]
    sending_b: tuple[int, ...]
    labels: tuple[str, ...]
    hadamard_targets: tuple[int, ...]
    channel_cnots: tuple[tuple[int, int], ...]
    step2_cnots: tuple[tuple[int, int], ...]
    mirror_map: Mapping[int, tuple[int, ...]]   # control qubit -> main qubits it mirrors
    blocks: tuple[Block, ...]

    @property
    def main(self) -> tuple[int, ...]:
        return self.main_bob + self.main_alice

    @property
    def controls(self) -> tuple[int, ...]:
        return self.control_a + self.control_b

    @property
    def sending(self) -> tuple[int, ...]:
        return self.sending_a + self.sending_b

    @property
    def charlie_index(self) -> Optional[int]:
        return self.charlie[0] if self.charlie else None

    @property
    def num_channel_qubits(self) -> int:
        return len(self.main) + len(self.charlie) + len(self.controls)

    @property
    def total_qubits(self) -> int:
        return self.num_channel_qubits + len(self.sending)

    @property
    def ancilla_start(self) -> int:
        """
        First index after main and charlie. Controls sit here before step 3 and,
        once they are measured away, the sending qubits slide down to it.
        """
        return len(self.main) + len(self.charlie)

    def role_of(self, q: int) -> QubitRole:
        for role, indices in (
            (QubitRole.MAIN_BOB, self.main_bob),
            (QubitRole.MAIN_ALICE, self.main_alice),
            (QubitRole.CHARLIE, self.charlie),
            (QubitRole.CONTROL_A, self.control_a),
            (QubitRole.CONTROL_B, self.control_b),
            (QubitRole.SENDING_A, self.sending_a),
            (QubitRole.SENDING_B, self.sending_b),
        ):
            if q in indices:
                return role
        raise IndexError(f"qubit {q} is not part of a {self.total_qubits}-qubit layout")


def channel_qubit_count(cfg: ProtocolConfig) -> int:
    """
    Closed form of the channel size: 2(n+m) plain, n+2m+1 with Alice's block
    entangled, n+m+2 with both, plus one for Charlie.
    """
    controls = (0 if cfg.n == 0 else 1 if cfg.alice_entangled else cfg.n) \
        + (0 if cfg.m == 0 else 1 if cfg.bob_entangled else cfg.m)
    return cfg.n + cfg.m + controls + (1 if cfg.controlled else 0)


def _labels(role: QubitRole, count: int, single: bool = False) -> list[str]:
    # A lone qubit standing for a whole block (or Charlie) carries no index.
    if count and single:
        return [role.value]
    return [f"{role.value}{i}" for i in range(count)]


def build_layout(cfg: ProtocolConfig) -> RegisterLayout:
    cfg.validate()
    n, m = cfg.n, cfg.m
    num_control_a = 0 if n == 0 else (1 if cfg.alice_entangled else n)
    num_control_b = 0 if m == 0 else (1 if cfg.bob_entangled else m)

    cursor = 0

    def take(count: int) -> tuple[int, ...]:
        nonlocal cursor
        indices = tuple(range(cursor, cursor + count))
        cursor += count
        return indices

    main_bob = take(n)
    main_alice = take(m)
    charlie = take(1 if cfg.controlled else 0)
    control_a = take(num_control_a)
    control_b = take(num_control_b)
    sending_a = take(n)
    sending_b = take(m)

    labels = (_labels(QubitRole.MAIN_BOB, n) + _labels(QubitRole.MAIN_ALICE, m)
              + _labels(QubitRole.CHARLIE, len(charlie), single=True)
              + _labels(QubitRole.CONTROL_A, num_control_a, single=cfg.alice_entangled)
              + _labels(QubitRole.CONTROL_B, num_control_b, single=cfg.bob_entangled)
              + _labels(QubitRole.SENDING_A, n) + _labels(QubitRole.SENDING_B, m))

    blocks = []
    if n:
        blocks.append(Block(Sender.ALICE, cfg.alice_entangled, main_bob, control_a, sending_a))
    if m:
        blocks.append(Block(Sender.BOB, cfg.bob_entangled, main_alice, control_b, sending_b))

    hadamard_targets: list[int] = []
    channel_cnots: list[tuple[int, int]] = []
    step2_cnots: list[tuple[int, int]] = []
    mirror_map: dict[int, tuple[int, ...]] = {}
    for block in blocks:
        first = block.main[0]
        if block.entangled:
            # GHZ block: one Hadamard, fan out from the first qubit, one control qubit.
            hadamard_targets.append(first)
            channel_cnots.extend((first, target) for target in block.main[1:])
            channel_cnots.append((first, block.controls[0]))
            step2_cnots.append((block.sending[0], block.controls[0]))
            mirror_map[block.controls[0]] = block.main
        else:
            hadamard_targets.extend(block.main)
            channel_cnots.extend(zip(block.main, block.controls))
            step2_cnots.extend(zip(block.sending, block.controls))
            mirror_map.update({control: (main,) for main, control in zip(block.main, block.controls)})

    if cfg.controlled:
        controls = control_a + control_b
        channel_cnots.extend(
            (controls[i], charlie[0]) for i, bit in enumerate(cfg.charlie_mask) if bit == "1"
        )

    layout = RegisterLayout(
        config=cfg,
        main_bob=main_bob,
        main_alice=main_alice,
        charlie=charlie,
        control_a=control_a,
        control_b=control_b,
        sending_a=sending_a,
        sending_b=sending_b,
        labels=tuple(labels),
        hadamard_targets=tuple(hadamard_targets),
        channel_cnots=tuple(channel_cnots),
        step2_cnots=tuple(step2_cnots),
        mirror_map=mirror_map,
        blocks=tuple(blocks),
    )
    logger.debug("Layout %s: %s", cfg, "".join(f"({label})" for label in layout.labels))
    return layout
