# app/services/semiring_service.py

from typing import Iterator, List, Optional, Sequence

import numpy as np
from loguru import logger

from app.core.exceptions import PreconditionError
from app.models.enums import SemiringKind
from app.models.measure import GroundSpace, Partition, Subset
from app.models.semiring import AlgebraSemiring, IntersectionSemiring, IntervalSemiring, Semiring
from app.models.semiring_products import ProductSemiring, SymmetricRectangleSemiring
from app.models.structures import HypercubeSpec


# ------------------------------------------------------------
# CONSTRUCTORS
# ------------------------------------------------------------
def from_algebra(partition: Partition, space: Optional[GroundSpace] = None) -> AlgebraSemiring:
    """Unions of cells of the generating partition (k = 1)."""
    space = space or GroundSpace.uniform(partition.size)
    return AlgebraSemiring(space, partition)


def power_set(space: GroundSpace) -> AlgebraSemiring:
    return AlgebraSemiring(space, Partition.singletons(space.size))


def intervals(space: GroundSpace, order: Optional[Sequence[int]] = None) -> IntervalSemiring:
    """Intervals of `order` (the point order when omitted), k = 2."""
    return IntervalSemiring(space, range(space.size) if order is None else order)


def product(factors: Sequence[Semiring]) -> ProductSemiring:
    """Products of factor members on the product space; k is the sum of the factors' k."""
    return ProductSemiring(factors)


def rectangles(base: GroundSpace) -> ProductSemiring:
    """S x T for arbitrary S, T (k = 2); its norm is the cut norm."""
    return ProductSemiring([power_set(base), power_set(base)], kind=SemiringKind.Rectangles)


def symmetric_rectangles(base: GroundSpace) -> SymmetricRectangleSemiring:
    return SymmetricRectangleSemiring(base)


def cylinder_family(spaces: Sequence[GroundSpace], family: Sequence[Sequence[int]]) -> IntersectionSemiring:
    """
    Intersections of one cylinder per coordinate set F in `family`
    (coordinates are 0-based). A cylinder over F is the preimage under the
    projection onto the coordinates in F of any set.
    """
    if not spaces:
        raise PreconditionError("A cylinder family needs at least one coordinate space")
    if not family:
        raise PreconditionError("A cylinder family needs at least one coordinate set")

    d = len(spaces)
    coordinate_sets = []
    for raw in family:
        coordinates = tuple(sorted(set(int(i) for i in raw)))
        if not coordinates:
            raise PreconditionError("Coordinate sets in a cylinder family must be nonempty")
        if coordinates[0] < 0 or coordinates[-1] >= d:
            raise PreconditionError(f"Coordinate set {list(raw)} is outside 0..{d - 1}")
        if coordinates not in coordinate_sets:
            coordinate_sets.append(coordinates)

    space = GroundSpace.product(*spaces)
    shape = np.array(space.shape)
    grid = np.indices(shape).reshape(d, -1)

    labels = []
    for coordinates in coordinate_sets:
        picked = list(coordinates)
        labels.append(np.ravel_multi_index(tuple(grid[picked]), tuple(shape[picked])))
    return IntersectionSemiring(space, labels, kind=SemiringKind.Cylinder)


def gowers_box(spaces: Sequence[GroundSpace]) -> IntersectionSemiring:
    """The cylinder family of all (d-1)-element coordinate sets."""
    d = len(spaces)
    if d < 2:
        raise PreconditionError("The box semiring needs at least two coordinates")
    return cylinder_family(spaces, [[i for i in range(d) if i != skip] for skip in range(d)])


def hypercube_insensitive(spec: HypercubeSpec) -> IntersectionSemiring:
    """
    Intersections over the cube's pairs {a, b} of (a,b)-insensitive sets:
    sets that are unions of classes of words equal after identifying a and b.
    """
    words = spec.words()
    labels = []
    for a, b in spec.pairs:
        keys = [word.replace(b, a) for word in words]
        labels.append(np.unique(keys, return_inverse=True)[1])
    return IntersectionSemiring(spec.space(), labels, kind=SemiringKind.Hypercube)


def intersection_of_algebras(space: GroundSpace, partitions: Sequence[Partition]) -> IntersectionSemiring:
    """Intersections of one member from each of k algebras (k-semiring)."""
    for partition in partitions:
        space.check_partition(partition)
    return IntersectionSemiring(space, [partition.labels for partition in partitions])


# ------------------------------------------------------------
# OPERATIONS
# ------------------------------------------------------------
def subtract(sr: Semiring, first: Subset, second: Subset) -> List[Subset]:
    return sr.subtract(first, second)


def enumerate_members(sr: Semiring, budget: Optional[int] = None) -> Iterator[Subset]:
    return sr.enumerate_members(budget)


def is_norm_separating(sr: Semiring) -> bool:
    """
    Whether member indicators separate points, i.e. the uniformity
    seminorm is a norm. Two points are inseparable exactly when their
    smallest enclosing members coincide.
    """
    seen = set()
    for index in range(sr.size):
        mask = sr.minimal_member(index).mask
        if mask in seen:
            logger.debug(f"{sr.kind.value} semiring does not separate point {index}")
            return False
        seen.add(mask)
    return True


def is_increasing(sequence: Sequence[Semiring], rng: np.random.Generator, samples: int = 32) -> bool:
    """Spot check that random members of each semiring are members of the next."""
    for smaller, larger in zip(sequence, sequence[1:]):
        if not smaller.space.same_as(larger.space):
            return False
        for _ in range(samples):
            if not larger.contains(smaller.random_member(rng)):
                return False
    return True


# ------------------------------------------------------------
# NAMED SEMIRINGS ON base x base (CLI)
# ------------------------------------------------------------
MATRIX_SEMIRINGS = ("rectangles", "symmetric_rectangles", "rows", "product_intervals", "intervals", "box", "power")


def from_name(name: str, base: GroundSpace) -> Semiring:
    """
    The semiring a CLI name stands for on the square of `base`. `rows`
    is the algebra of row cells {x} x base; `intervals` orders the square
    row by row.
    """
    square = GroundSpace.product(base, base)
    if name == "rectangles":
        return rectangles(base)
    if name == "symmetric_rectangles":
        return symmetric_rectangles(base)
    if name == "rows":
        return from_algebra(Partition.from_labels(np.repeat(np.arange(base.size), base.size)), square)
    if name == "product_intervals":
        return product([intervals(base), intervals(base)])
    if name == "intervals":
        return intervals(square)
    if name == "box":
        return gowers_box([base, base])
    if name == "power":
        return power_set(square)
    raise PreconditionError(f"Unknown semiring '{name}' (one of {', '.join(MATRIX_SEMIRINGS)})")
