"""
Command-line front end.

    python3 -m src.bqt_cli run --n 2 --m 1 --seed 7 --random-inputs
    python3 -m src.bqt_cli verify --n 2 --m 1 --trials 5
    python3 -m src.bqt_cli channel --n 2 --m 1 --out ch.qsv
    python3 -m src.bqt_cli compare ch.qsv other.qsv --allow-local-paulis

Exit codes: 0 success, 1 protocol or verification failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import asyncio
import logging
import sys
import time
from pathlib import Path
from typing import Any, Optional

from src.layout import ConfigError, ProtocolConfig
from src.oracle import ResourceLimitError, equivalent_up_to_relabeling, verify_all_branches_async
from src.protocol import BQTSimulator, build_channel, random_inputs
from src.protocol_utils import ProtocolFailure
from src.reports import (
    RunReport,
    canonical_json,
    equivalence_document,
    mismatch_document,
    verification_document,
    verification_suite_document,
)
from src.rng import SeededRNG
from src.statevec import StateVector, StateVectorError, read_qsv, to_qsv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Flags parsed but do not make a valid request."""


#################################
# Argument parsing
#################################

def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--n", type=int, required=True, help="Alice's sending-qubit count")
    parser.add_argument("--m", type=int, required=True, help="Bob's sending-qubit count")
    parser.add_argument("--entangled-a", action="store_true", help="Alice sends a GHZ-form block")
    parser.add_argument("--entangled-b", action="store_true", help="Bob sends a GHZ-form block")
    parser.add_argument("--controlled", action="store_true", help="add Charlie's supervisor qubit")
    parser.add_argument("--charlie-mask", help="control qubits feeding Charlie, one bit per control qubit")
    parser.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")


def _add_input_flags(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--random-inputs", action="store_true", help="draw seeded random sending states")
    group.add_argument("--phi-a", type=Path, help="Alice's sending state, .qsv")
    parser.add_argument("--phi-b", type=Path, help="Bob's sending state, .qsv")


def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--out", type=Path, help="write the document here instead of stdout")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bqt",
        description="Simulate and verify bidirectional (controlled) quantum teleportation.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run the protocol once with sampled measurements")
    _add_config_flags(run)
    _add_input_flags(run)
    run.add_argument("--timing", action="store_true", help="include wall-clock duration in the report")
    _add_common_flags(run)

    verify = commands.add_parser("verify", help="enumerate every measurement branch")
    _add_config_flags(verify)
    _add_input_flags(verify)
    verify.add_argument("--trials", type=int, default=1, help="random input pairs to verify")
    verify.add_argument("--timing", action="store_true", help="include enumeration time in the report")
    _add_common_flags(verify)

    channel = commands.add_parser("channel", help="write the Step 1 channel as .qsv")
    _add_config_flags(channel)
    _add_common_flags(channel)

    compare = commands.add_parser("compare", help="check two .qsv states for equivalence up to relabeling")
    compare.add_argument("file_a", type=Path)
    compare.add_argument("file_b", type=Path)
    compare.add_argument("--allow-local-paulis", action="store_true", help="also search local I/X/Z/XZ")
    _add_common_flags(compare)
    return parser


def config_from_args(args: argparse.Namespace) -> ProtocolConfig:
    cfg = ProtocolConfig(
        n=args.n,
        m=args.m,
        alice_entangled=args.entangled_a,
        bob_entangled=args.entangled_b,
        controlled=args.controlled,
        charlie_mask=args.charlie_mask,
        seed=args.seed,
    )
    cfg.validate()
    return cfg


def _input_seed(seed: int) -> int:
    return SeededRNG(seed).fork_seed()


def _load_inputs(args: argparse.Namespace, cfg: ProtocolConfig) -> tuple[StateVector, StateVector]:
    if args.random_inputs:
        return random_inputs(cfg, _input_seed(cfg.seed))
    if args.phi_a is None or args.phi_b is None:
        raise UsageError("give --random-inputs or both --phi-a and --phi-b")
    return read_qsv(args.phi_a), read_qsv(args.phi_b)


def _emit(text: str, out: Optional[Path]):
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)


#################################
# Commands
#################################

def cmd_run(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    phi_a, phi_b = _load_inputs(args, cfg)
    started = time.perf_counter()
    try:
        branch = BQTSimulator(cfg).run(phi_a, phi_b)
    except ProtocolFailure as exc:
        logger.error("Protocol failed: %s", exc)
        for key, value in exc.audit.items():
            logger.error("  %s: %s", key, value)
        return EXIT_FAILURE
    duration = time.perf_counter() - started if args.timing else None
    report = RunReport.from_branch(cfg, phi_a, phi_b, branch, duration)
    _emit(report.to_json(), args.out)
    return EXIT_OK if report.succeeded else EXIT_FAILURE


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    if args.trials < 1:
        raise UsageError(f"--trials must be at least 1 (got {args.trials})")
    if args.phi_a is not None or args.phi_b is not None:
        if args.random_inputs:
            raise UsageError("--random-inputs cannot be combined with --phi-a/--phi-b")
        seeds = [None]
        pairs = [_load_inputs(args, cfg)]
    else:
        # Random inputs are the default for verify, one fresh pair per trial.
        rng = SeededRNG(cfg.seed)
        seeds = [rng.fork_seed() for _ in range(args.trials)]
        pairs = [random_inputs(cfg, seed) for seed in seeds]

    trials: list[dict[str, Any]] = []
    for seed, (phi_a, phi_b) in zip(seeds, pairs):
        report = asyncio.run(verify_all_branches_async(cfg, phi_a, phi_b))
        trials.append(verification_document(report, seed, args.timing))
    document = verification_suite_document(cfg, trials)
    _emit(canonical_json(document), args.out)
    return EXIT_OK if document["passed"] else EXIT_FAILURE


def cmd_channel(args: argparse.Namespace) -> int:
    channel = build_channel(config_from_args(args))
    _emit(to_qsv(channel), args.out)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    a, b = read_qsv(args.file_a), read_qsv(args.file_b)
    sizes = (a.num_qubits, b.num_qubits)
    if a.num_qubits != b.num_qubits:
        logger.error("Qubit-count mismatch: %d vs %d", *sizes)
        _emit(canonical_json(mismatch_document(sizes, args.allow_local_paulis)), args.out)
        return EXIT_USAGE
    result = equivalent_up_to_relabeling(a, b, args.allow_local_paulis)
    _emit(canonical_json(equivalence_document(result, sizes, args.allow_local_paulis)), args.out)
    return EXIT_OK if result.equivalent else EXIT_FAILURE


COMMANDS = {
    "run": cmd_run,
    "verify": cmd_verify,
    "channel": cmd_channel,
    "compare": cmd_compare,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ResourceLimitError, StateVectorError, UsageError, OSError) as exc:
        # StateVectorError covers bad .qsv files and input states of the wrong size.
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
