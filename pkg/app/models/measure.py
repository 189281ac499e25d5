# app/models/measure.py

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, List, Sequence, Tuple, Union

import numpy as np

from app.core.config import current_settings
from app.core.exceptions import DimensionMismatchError, PreconditionError


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


# ------------------------------------------------------------
# GROUND SPACE
# ------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class GroundSpace:
    """
    A finite probability space: ordered points plus their probabilities.
    Product spaces remember their factors; points are then tuples in
    row-major order (the last factor varies fastest).
    """
    points: Tuple[Hashable, ...]
    weights: np.ndarray
    factors: Tuple["GroundSpace", ...] = ()

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        points = tuple(self.points)

        if weights.ndim != 1:
            raise PreconditionError("Weights must be a flat list of numbers")
        if len(points) == 0:
            raise PreconditionError("A ground space needs at least one point")
        if len(points) != weights.size:
            raise DimensionMismatchError(
                f"{len(points)} points but {weights.size} weights",
                {"points": len(points), "weights": int(weights.size)},
            )
        if not np.all(np.isfinite(weights)) or bool((weights < 0).any()):
            raise PreconditionError("Weights must be finite and nonnegative")

        total = float(weights.sum())
        if abs(total - 1.0) > current_settings().WEIGHT_TOLERANCE:
            raise PreconditionError(f"Weights sum to {total!r}, expected 1", {"sum": total})

        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", _readonly(weights))
        object.__setattr__(self, "factors", tuple(self.factors))

    # --------------------------------------------------------
    # CONSTRUCTORS
    # --------------------------------------------------------
    @classmethod
    def uniform(cls, points: Union[int, Sequence[Hashable]]) -> "GroundSpace":
        if isinstance(points, int):
            points = range(points)
        points = tuple(points)
        if not points:
            raise PreconditionError("A ground space needs at least one point")
        return cls(points, np.full(len(points), 1.0 / len(points)))

    @classmethod
    def product(cls, *spaces: "GroundSpace") -> "GroundSpace":
        if not spaces:
            raise PreconditionError("A product needs at least one factor")
        points = tuple(itertools.product(*(space.points for space in spaces)))
        weights = functools.reduce(np.multiply.outer, [space.weights for space in spaces]).ravel()
        # Renormalise against drift from the outer products
        weights = weights / weights.sum()
        return cls(points, weights, tuple(spaces))

    # --------------------------------------------------------
    # ACCESSORS
    # --------------------------------------------------------
    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> Tuple[int, ...]:
        if self.factors:
            return tuple(factor.size for factor in self.factors)
        return (self.size,)

    def prob(self, subset: "Subset") -> float:
        self.check_subset(subset)
        return float(self.weights @ subset.indicator())

    def index_of(self, point: Hashable) -> int:
        try:
            return self.points.index(point)
        except ValueError:
            raise PreconditionError(f"Point {point!r} is not in the space")

    def same_as(self, other: "GroundSpace") -> bool:
        if self is other:
            return True
        return self.points == other.points and np.array_equal(self.weights, other.weights)

    # --------------------------------------------------------
    # DIMENSION CHECKS
    # --------------------------------------------------------
    def check_subset(self, subset: "Subset") -> None:
        if subset.size != self.size:
            raise DimensionMismatchError(
                f"Subset lives on {subset.size} points, space has {self.size}",
                {"subset": subset.size, "space": self.size},
            )

    def check_var(self, f: "RandomVar") -> None:
        if f.size != self.size:
            raise DimensionMismatchError(
                f"Random variable has {f.size} values, space has {self.size} points",
                {"values": f.size, "space": self.size},
            )

    def check_partition(self, partition: "Partition") -> None:
        if partition.size != self.size:
            raise DimensionMismatchError(
                f"Partition covers {partition.size} points, space has {self.size}",
                {"partition": partition.size, "space": self.size},
            )


# ------------------------------------------------------------
# SUBSET
# ------------------------------------------------------------
@dataclass(frozen=True)
class Subset:
    """
    A subset of a ground space of `size` points, stored as a bitmask
    (bit i set iff point i is in). The integer order of masks is the
    canonical order used for deduplication and tie-breaking.
    """
    mask: int
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise PreconditionError("Subsets live on spaces with at least one point")
        if self.mask < 0 or self.mask >> self.size:
            raise DimensionMismatchError(f"Mask does not fit a {self.size}-point space")

    @classmethod
    def from_indicator(cls, indicator: Iterable) -> "Subset":
        row = np.asarray(indicator, dtype=bool)
        if row.ndim != 1:
            raise DimensionMismatchError("Indicator must be one-dimensional")
        packed = np.packbits(row, bitorder="little")
        return cls(int.from_bytes(packed.tobytes(), "little"), int(row.size))

    @classmethod
    def from_indices(cls, indices: Iterable[int], size: int) -> "Subset":
        mask = 0
        for index in indices:
            if not 0 <= index < size:
                raise DimensionMismatchError(f"Point index {index} outside a {size}-point space")
            mask |= 1 << int(index)
        return cls(mask, size)

    @classmethod
    def empty(cls, size: int) -> "Subset":
        return cls(0, size)

    @classmethod
    def full(cls, size: int) -> "Subset":
        return cls((1 << size) - 1, size)

    def indicator(self) -> np.ndarray:
        raw = self.mask.to_bytes((self.size + 7) // 8, "little")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
        return bits[: self.size].astype(bool)

    def indices(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.indicator())]

    @property
    def is_empty(self) -> bool:
        return self.mask == 0

    @property
    def is_full(self) -> bool:
        return self.mask == (1 << self.size) - 1

    @property
    def lowest(self) -> int:
        return (self.mask & -self.mask).bit_length() - 1

    def _check(self, other: "Subset") -> None:
        if other.size != self.size:
            raise DimensionMismatchError(f"Subsets of {self.size} and {other.size} points do not combine")

    def __len__(self) -> int:
        return _popcount(self.mask)

    def __contains__(self, index: int) -> bool:
        return bool((self.mask >> index) & 1)

    def __and__(self, other: "Subset") -> "Subset":
        self._check(other)
        return Subset(self.mask & other.mask, self.size)

    def __or__(self, other: "Subset") -> "Subset":
        self._check(other)
        return Subset(self.mask | other.mask, self.size)

    def __sub__(self, other: "Subset") -> "Subset":
        self._check(other)
        return Subset(self.mask & ~other.mask, self.size)

    def complement(self) -> "Subset":
        return Subset(~self.mask & ((1 << self.size) - 1), self.size)

    def issubset(self, other: "Subset") -> bool:
        self._check(other)
        return self.mask & ~other.mask == 0

    def isdisjoint(self, other: "Subset") -> bool:
        self._check(other)
        return self.mask & other.mask == 0


# ------------------------------------------------------------
# RANDOM VARIABLE
# ------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class RandomVar:
    """A real-valued function on a ground space, one value per point."""
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise DimensionMismatchError("Random variable values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise PreconditionError("Random variable values must be finite")
        object.__setattr__(self, "values", _readonly(values))

    @classmethod
    def constant(cls, value: float, size: int) -> "RandomVar":
        return cls(np.full(size, float(value)))

    @classmethod
    def indicator_of(cls, subset: Subset) -> "RandomVar":
        return cls(subset.indicator().astype(np.float64))

    @property
    def size(self) -> int:
        return int(self.values.size)

    def _other(self, other) -> np.ndarray:
        if isinstance(other, RandomVar):
            if other.size != self.size:
                raise DimensionMismatchError(f"Random variables of {self.size} and {other.size} values do not combine")
            return other.values
        return np.float64(other)

    def __add__(self, other) -> "RandomVar":
        return RandomVar(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other) -> "RandomVar":
        return RandomVar(self.values - self._other(other))

    def __rsub__(self, other) -> "RandomVar":
        return RandomVar(self._other(other) - self.values)

    def __mul__(self, other) -> "RandomVar":
        return RandomVar(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "RandomVar":
        return RandomVar(self.values / np.float64(scalar))

    def __neg__(self) -> "RandomVar":
        return RandomVar(-self.values)

    def __abs__(self) -> "RandomVar":
        return RandomVar(np.abs(self.values))

    def allclose(self, other: "RandomVar", atol: float) -> bool:
        return other.size == self.size and bool(np.allclose(self.values, other.values, rtol=0.0, atol=atol))


# ------------------------------------------------------------
# PARTITION
# ------------------------------------------------------------
@dataclass(frozen=True)
class Partition:
    """
    Pairwise disjoint nonempty cells covering the space. Empty cells are
    dropped and cells are kept sorted by their lowest point, so two
    partitions with the same cells compare equal.
    """
    cells: Tuple[Subset, ...]
    labels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cells = tuple(cell for cell in self.cells if not cell.is_empty)
        if not cells:
            raise PreconditionError("A partition needs at least one nonempty cell")

        size = cells[0].size
        covered = 0
        for cell in cells:
            if cell.size != size:
                raise DimensionMismatchError("Partition cells live on different spaces")
            if covered & cell.mask:
                raise PreconditionError("Partition cells overlap")
            covered |= cell.mask
        if covered != (1 << size) - 1:
            raise PreconditionError("Partition cells do not cover the space")

        cells = tuple(sorted(cells, key=lambda cell: cell.lowest))
        labels = np.empty(size, dtype=np.int64)
        for index, cell in enumerate(cells):
            labels[cell.indicator()] = index

        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "labels", _readonly(labels))

    @classmethod
    def trivial(cls, size: int) -> "Partition":
        return cls((Subset.full(size),))

    @classmethod
    def singletons(cls, size: int) -> "Partition":
        return cls(tuple(Subset(1 << i, size) for i in range(size)))

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Partition":
        labels = np.asarray(labels)
        _, inverse = np.unique(labels, return_inverse=True)
        inverse = inverse.ravel()
        return cls(tuple(Subset.from_indicator(inverse == value) for value in np.unique(inverse)))

    @classmethod
    def from_index_lists(cls, cells: Sequence[Sequence[int]], size: int) -> "Partition":
        return cls(tuple(Subset.from_indices(cell, size) for cell in cells))

    @property
    def size(self) -> int:
        return self.cells[0].size

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator[Subset]:
        return iter(self.cells)

    def cell_matrix(self) -> np.ndarray:
        matrix = np.zeros((len(self.cells), self.size), dtype=bool)
        matrix[self.labels, np.arange(self.size)] = True
        return matrix

    def refines(self, coarser: "Partition") -> bool:
        if coarser.size != self.size:
            return False
        pairs = np.unique(self.labels * len(coarser) + coarser.labels)
        return int(pairs.size) == len(self.cells)

    def to_index_lists(self) -> List[List[int]]:
        return [cell.indices() for cell in self.cells]
