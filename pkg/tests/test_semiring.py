import pytest

from app.core.exceptions import EnumerationBudgetExceeded, NotAMemberError, PreconditionError
from app.models.measure import GroundSpace, Partition, Subset
from app.models.structures import HypercubeSpec
from app.services.semiring_service import (
    from_algebra,
    from_name,
    gowers_box,
    hypercube_insensitive,
    intersection_of_algebras,
    intervals,
    is_increasing,
    is_norm_separating,
    power_set,
    product,
    rectangles,
    symmetric_rectangles,
)

BUILDERS = {
    "algebra": lambda: from_algebra(Partition.from_labels([0, 0, 1, 2, 2, 1])),
    "intervals": lambda: intervals(GroundSpace.uniform(12)),
    "product_intervals": lambda: product([intervals(GroundSpace.uniform(5)), intervals(GroundSpace.uniform(5))]),
    "rectangles": lambda: rectangles(GroundSpace.uniform(5)),
    "symmetric_rectangles": lambda: symmetric_rectangles(GroundSpace.uniform(4)),
    "box": lambda: gowers_box([GroundSpace.uniform(3)] * 3),
    "hypercube": lambda: hypercube_insensitive(HypercubeSpec(alphabet=["a", "b", "c"], n=2)),
    "intersection": lambda: intersection_of_algebras(
        GroundSpace.uniform(6),
        [Partition.from_labels([0, 0, 1, 1, 2, 2]), Partition.from_labels([0, 1, 0, 1, 0, 1])],
    ),
}


# ----------------------------------------------------------------
# SEMIRING AXIOMS
# ----------------------------------------------------------------
@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_semiring_axioms(name, rng):
    sr = BUILDERS[name]()

    # 1. Empty set and the whole space are members
    assert sr.contains(Subset.empty(sr.size))
    assert sr.contains(Subset.full(sr.size))

    # 2. Closed under intersection, differences split into <= k members
    for _ in range(1000):
        S = sr.random_member(rng)
        T = sr.random_member(rng)
        assert sr.contains(S & T)
        pieces = sr.subtract(S, T)
        assert len(pieces) <= sr.k
        assert all(sr.contains(piece) for piece in pieces)
        union = Subset.empty(sr.size)
        for piece in pieces:
            assert piece.isdisjoint(union)
            union = union | piece
        assert union == S - T


def test_subtract_rejects_non_members(base2):
    sr = rectangles(base2)
    diagonal = Subset.from_indices([0, 3], 4)

    with pytest.raises(NotAMemberError):
        sr.subtract(diagonal, Subset.full(4))


# ----------------------------------------------------------------
# MEMBER COUNTS
# ----------------------------------------------------------------
def test_intervals_on_three_points(base3):
    members = list(intervals(base3).enumerate_members())

    assert len(members) == 7
    assert Subset.empty(3) in members


def test_rectangles_on_two_points(base2):
    # 3 nonempty sides squared, plus the empty set
    assert len(list(rectangles(base2).enumerate_members())) == 10


def test_single_pair_insensitive_sets():
    spec = HypercubeSpec(alphabet=["a", "b", "c"], n=1, pairs=[("a", "b")])
    members = {frozenset(m.indices()) for m in hypercube_insensitive(spec).enumerate_members()}

    assert members == {frozenset(), frozenset({2}), frozenset({0, 1}), frozenset({0, 1, 2})}


def test_binary_alphabet_degenerates():
    spec = HypercubeSpec(alphabet=["a", "b"], n=2)
    members = {m.mask for m in hypercube_insensitive(spec).enumerate_members()}

    assert members == {0, (1 << 4) - 1}


def test_enumeration_budget():
    with pytest.raises(EnumerationBudgetExceeded):
        list(power_set(GroundSpace.uniform(4)).enumerate_members(budget=3))


def test_symmetric_rectangles_constant(base2):
    assert symmetric_rectangles(base2).k == 4
    assert rectangles(base2).k == 2


# ----------------------------------------------------------------
# NORM SEPARATION & SEQUENCES
# ----------------------------------------------------------------
def test_norm_separating(base2):
    assert is_norm_separating(power_set(GroundSpace.uniform(3)))
    assert is_norm_separating(rectangles(base2))
    assert not is_norm_separating(from_algebra(Partition.from_labels([0, 0, 1])))


def test_increasing_sequence(base3, rng):
    chain = [from_name("rows", base3), from_name("rectangles", base3), from_name("power", base3)]

    assert is_increasing(chain, rng)
    assert not is_increasing(list(reversed(chain)), rng)


def test_unknown_semiring_name(base2):
    with pytest.raises(PreconditionError):
        from_name("triangles", base2)
