import pytest

from src.rng import SEED_BOUND, SeededRNG


def test_same_seed_same_draws():
    a, b = SeededRNG(42), SeededRNG(42)
    assert [a.random() for _ in range(10)] == [b.random() for _ in range(10)]
    assert a.fork_seed() == b.fork_seed()


def test_draws_in_unit_interval():
    rng = SeededRNG(SEED_BOUND - 1)
    assert all(0.0 <= rng.random() < 1.0 for _ in range(1000))


def test_forked_seeds_differ():
    rng = SeededRNG(0)
    seeds = [rng.fork_seed() for _ in range(5)]
    assert len(set(seeds)) == 5
    assert all(0 <= seed < SEED_BOUND for seed in seeds)


@pytest.mark.parametrize("seed", [-1, SEED_BOUND])
def test_seed_out_of_range(seed):
    with pytest.raises(ValueError):
        SeededRNG(seed)
