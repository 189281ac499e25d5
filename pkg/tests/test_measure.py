import numpy as np
import pytest

from app.core.exceptions import DimensionMismatchError, PreconditionError
from app.models.measure import GroundSpace, Partition, RandomVar, Subset
from app.services.measure_service import (
    common_refinement,
    cond_expectation,
    cond_expectation_on,
    expectation,
    integral_over,
    is_measurable,
    join,
    lp_norm,
)

# ----------------------------------------------------------------
# GROUND SPACES
# ----------------------------------------------------------------
def test_uniform_and_product_spaces(base2):
    square = GroundSpace.product(base2, base2)

    assert square.size == 4
    assert square.shape == (2, 2)
    assert square.points[1] == (0, 1)
    assert np.allclose(square.weights, 0.25)


def test_weights_must_sum_to_one():
    with pytest.raises(PreconditionError):
        GroundSpace((0, 1), np.array([0.5, 0.6]))


def test_weights_must_match_points():
    with pytest.raises(DimensionMismatchError):
        GroundSpace((0, 1, 2), np.array([0.5, 0.5]))


# ----------------------------------------------------------------
# SUBSETS & PARTITIONS
# ----------------------------------------------------------------
def test_subset_set_algebra():
    a = Subset.from_indices([0, 1], 4)
    b = Subset.from_indices([1, 2], 4)

    assert (a & b).indices() == [1]
    assert (a | b).indices() == [0, 1, 2]
    assert (a - b).indices() == [0]
    assert a.complement().indices() == [2, 3]
    assert len(a) == 2 and 1 in a and 3 not in a


def test_partition_cells_are_canonical():
    # 1. Same cells given in a different order compare equal
    first = Partition.from_index_lists([[2, 3], [0, 1]], 4)
    second = Partition.from_labels([5, 5, 1, 1])

    assert first == second
    assert first.to_index_lists() == [[0, 1], [2, 3]]


def test_partition_rejects_overlaps():
    with pytest.raises(PreconditionError):
        Partition.from_index_lists([[0, 1], [1, 2], [3]], 4)


def test_common_refinement_and_join():
    P = Partition.from_index_lists([[0, 1, 2, 3]], 4)
    refined = common_refinement(P, Subset.from_indices([0, 2], 4))
    joined = join(refined, Partition.from_index_lists([[0, 1], [2, 3]], 4))

    assert refined.to_index_lists() == [[0, 2], [1, 3]]
    assert refined.refines(P)
    assert len(joined) == 4


def test_refinements_reject_other_spaces():
    P = Partition.trivial(4)

    with pytest.raises(DimensionMismatchError):
        common_refinement(P, Subset.from_indices([0], 3))
    with pytest.raises(DimensionMismatchError):
        join(P, Partition.trivial(5))


# ----------------------------------------------------------------
# INTEGRALS & CONDITIONAL EXPECTATIONS
# ----------------------------------------------------------------
def test_lp_norm_and_integrals(square2, sign_values):
    assert lp_norm(sign_values, square2, 2.0) == pytest.approx(1.0)
    assert lp_norm(sign_values, square2, 1.5) == pytest.approx(1.0)
    assert expectation(sign_values, square2) == pytest.approx(0.0)
    assert integral_over(sign_values, Subset.from_indices([0], 4), square2) == pytest.approx(0.25)


def test_cond_expectation_averages_cells():
    space = GroundSpace((0, 1, 2), np.array([0.5, 0.25, 0.25]))
    f = RandomVar([2.0, 4.0, 0.0])
    P = Partition.from_index_lists([[0, 1], [2]], 3)

    averaged = cond_expectation(f, P, space)

    # (0.5*2 + 0.25*4) / 0.75 = 8/3
    assert averaged.values[0] == pytest.approx(8 / 3)
    assert averaged.values[1] == pytest.approx(8 / 3)
    assert averaged.values[2] == pytest.approx(0.0)
    assert is_measurable(averaged, P, 1e-12)
    assert not is_measurable(f, P, 1e-12)


def random_setting(rng, n=8):
    space = GroundSpace(tuple(range(n)), rng.dirichlet(np.ones(n)))
    P = Partition.from_labels(rng.integers(0, 3, size=n))
    Q = join(P, Partition.from_labels(rng.integers(0, 2, size=n)))
    return space, P, Q, RandomVar(rng.normal(size=n))


@pytest.mark.slow
def test_cond_expectation_properties(rng):
    for _ in range(500):
        space, P, Q, f = random_setting(rng, int(rng.integers(2, 10)))
        averaged = cond_expectation(f, P, space)

        # 1. Idempotent
        assert np.allclose(cond_expectation(averaged, P, space).values, averaged.values)

        # 2. Contraction in every L_p
        for p in (1.0, 1.5, 2.0, 4.0):
            assert lp_norm(averaged, space, p) <= lp_norm(f, space, p) + 1e-12

        # 3. Tower property through the finer partition
        assert Q.refines(P)
        tower = cond_expectation(cond_expectation(f, Q, space), P, space)
        assert np.allclose(tower.values, averaged.values)

        # 4. Integral preserved
        assert expectation(averaged, space) == pytest.approx(expectation(f, space), abs=1e-12)


def test_cond_expectation_on_null_set_is_zero():
    space = GroundSpace((0, 1), np.array([1.0, 0.0]))
    f = RandomVar([1.0, 7.0])

    assert cond_expectation_on(f, Subset.from_indices([1], 2), space) == 0.0


def test_random_var_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        RandomVar([1.0, 2.0]) + RandomVar([1.0])
