import numpy as np
import pytest

from app.core.exceptions import PreconditionError
from app.models.martingale import Filtration
from app.models.measure import GroundSpace, Partition, RandomVar
from app.services.martingale_service import (
    bcl_inequality_gap,
    difference_sequence,
    gap_holds,
    is_martingale_difference,
    monotone_basis_gap,
    partial_sum_gap,
    rx_convexity_gap,
    rx_inequality_gap,
)


@pytest.fixture
def filtration():
    # 8 points, dyadic refinement
    return Filtration.of([
        Partition.trivial(8),
        Partition.from_labels([0, 0, 0, 0, 1, 1, 1, 1]),
        Partition.from_labels([0, 0, 1, 1, 2, 2, 3, 3]),
        Partition.singletons(8),
    ])


@pytest.fixture
def weighted_space(rng):
    return GroundSpace(tuple(range(8)), rng.dirichlet(np.ones(8)))


# ----------------------------------------------------------------
# DIFFERENCE SEQUENCES
# ----------------------------------------------------------------
def test_difference_sequence_sums_back(filtration, weighted_space, rng):
    f = RandomVar(rng.normal(size=8))
    d = difference_sequence(f, filtration, weighted_space)

    assert len(d) == 4
    assert is_martingale_difference(d, weighted_space)
    # The last level is the singleton partition, so the sum is f itself
    assert d.total().allclose(f, atol=1e-12)


def test_non_refining_filtration_is_rejected():
    with pytest.raises(PreconditionError):
        Filtration.of([Partition.from_labels([0, 0, 1, 1]), Partition.from_labels([0, 1, 1, 0])])


# ----------------------------------------------------------------
# INEQUALITY GAPS ON RANDOM INSTANCES
# ----------------------------------------------------------------
@pytest.mark.parametrize("p", [1.1, 1.5, 1.9, 2.0])
def test_gaps_are_nonnegative(p, filtration, weighted_space, rng):
    for _ in range(40):
        f = RandomVar(rng.normal(size=8) * rng.uniform(0.1, 5.0))
        y = RandomVar(rng.normal(size=8))
        d = difference_sequence(f, filtration, weighted_space)

        assert gap_holds(rx_inequality_gap(f, filtration, weighted_space, p))
        assert gap_holds(rx_convexity_gap(f, filtration[2], weighted_space, p))
        assert gap_holds(bcl_inequality_gap(f, y, weighted_space, p))
        assert gap_holds(monotone_basis_gap(d, rng.normal(size=4), 1, weighted_space, p))
        assert gap_holds(partial_sum_gap(d, 1, 2, weighted_space, p))


def random_filtration(rng: np.random.Generator, n: int = 8) -> Filtration:
    """Trivial, then a random split, then a random split of every cell."""
    coarse = rng.integers(0, 2, n)
    fine = coarse * 2 + rng.integers(0, 2, n)
    return Filtration.of([Partition.trivial(n), Partition.from_labels(coarse), Partition.from_labels(fine)])


@pytest.mark.slow
@pytest.mark.parametrize("p", [1.1, 1.5, 2.0])
def test_gaps_hold_on_random_filtrations(p, rng):
    for _ in range(10_000):
        space = GroundSpace(tuple(range(8)), rng.dirichlet(np.ones(8)))
        levels = random_filtration(rng)
        f = RandomVar(rng.normal(size=8))

        gap = rx_inequality_gap(f, levels, space, p)
        assert gap_holds(gap)
        if p == 2.0:
            assert abs(gap) <= 1e-9
        assert gap_holds(rx_convexity_gap(f, levels[1], space, p))
        assert gap_holds(bcl_inequality_gap(f, RandomVar(rng.normal(size=8)), space, p))


def test_square_function_is_exact_at_two(filtration, weighted_space, rng):
    f = RandomVar(rng.normal(size=8))

    assert rx_inequality_gap(f, filtration, weighted_space, 2.0) == pytest.approx(0.0, abs=1e-9)


def test_exponent_range(filtration, weighted_space):
    f = RandomVar(np.arange(8.0))

    with pytest.raises(PreconditionError):
        rx_inequality_gap(f, filtration, weighted_space, 2.5)
    with pytest.raises(PreconditionError):
        bcl_inequality_gap(f, f, weighted_space, 1.0)
