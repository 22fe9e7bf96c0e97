"""Seeded random number generator, every stochastic choice goes through it."""
from __future__ import annotations

import numpy as np

SEED_BOUND = 2**64  # Seeds are unsigned 64-bit integers


class SeededRNG:
    """
    Wrapper around numpy's PCG64 generator. Runs are replayable from the seed alone.
    """

    def __init__(self, seed: int):
        if not 0 <= seed < SEED_BOUND:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self._generator = np.random.Generator(np.random.PCG64(seed))

    def random(self) -> float:
        """Uniform draw in [0, 1), used as the measurement rng_draw."""
        return float(self._generator.random())

    def fork_seed(self) -> int:
        """Derive a seed for a sub-task (input sampling, verification trials)."""
        return int(self._generator.integers(0, SEED_BOUND, dtype=np.uint64))
