# app/models/semiring.py

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import current_settings
from app.core.exceptions import (
    EnumerationBudgetExceeded,
    ExactSearchInfeasibleError,
    InternalInvariantError,
    NotAMemberError,
    PreconditionError,
)
from app.models.enums import SemiringKind
from app.models.measure import GroundSpace, Partition, Subset

RowChooser = Callable[[int], Subset]


@dataclass(frozen=True)
class Candidate:
    """A member together with the integral of the searched mass over it."""
    value: float
    subset: Subset


class ArgmaxTracker:
    """
    Keeps the best member seen so far. Values within `tol` of each other
    are ties, resolved by the smallest mask; the empty set (value 0) is
    the starting point since every semiring contains it.
    """

    def __init__(self, size: int, tol: Optional[float] = None):
        self.tol = current_settings().TIE_TOLERANCE if tol is None else tol
        self.value = 0.0
        self.subset = Subset.empty(size)

    def offer(self, value: float, subset: Subset) -> None:
        if value > self.value + self.tol:
            self.value, self.subset = value, subset
        elif value >= self.value - self.tol and subset.mask < self.subset.mask:
            self.value, self.subset = value, subset

    def offer_rows(self, values: np.ndarray, build: RowChooser) -> None:
        if values.size == 0:
            return
        top = float(values.max())
        if top < self.value - self.tol:
            return
        threshold = max(top, self.value) - self.tol
        for row in np.flatnonzero(values >= threshold):
            self.offer(float(values[row]), build(int(row)))

    @property
    def best(self) -> Candidate:
        return Candidate(self.value, self.subset)


def _code_bits(codes: np.ndarray, width: int) -> np.ndarray:
    """Rows of the binary expansion (least significant first) of each code."""
    return ((codes[:, None] >> np.arange(width, dtype=np.int64)) & 1).astype(bool)


def _code_batches(total: int, batch_size: int) -> Iterator[np.ndarray]:
    for start in range(0, total, batch_size):
        yield np.arange(start, min(total, start + batch_size), dtype=np.int64)


# ------------------------------------------------------------
# THE k-SEMIRING CONTRACT
# ------------------------------------------------------------
class Semiring(ABC):
    """
    A k-semiring on a finite ground space: contains the empty set and the
    whole space, is closed under intersection, and every difference S - T
    of members splits into at most k disjoint members.

    Subclasses supply a structural membership test, the constructive
    subtraction, member enumeration and an exact maximiser of
    sum_{x in S} mass(x) over members S.
    """
    kind: SemiringKind

    def __init__(self, space: GroundSpace, k: int):
        if k < 1:
            raise PreconditionError(f"k must be a positive integer, got {k}")
        self.space = space
        self.k = k

    def __repr__(self) -> str:
        return f"{type(self).__name__}(k={self.k}, points={self.space.size})"

    @property
    def size(self) -> int:
        return self.space.size

    # --------------------------------------------------------
    # MEMBERSHIP & SUBTRACTION
    # --------------------------------------------------------
    @abstractmethod
    def contains(self, subset: Subset) -> bool:
        ...

    @abstractmethod
    def _subtract(self, first: Subset, second: Subset) -> List[Subset]:
        ...

    @abstractmethod
    def minimal_member(self, index: int) -> Subset:
        """The smallest member containing point `index`."""

    def require_member(self, subset: Subset, name: str = "subset") -> None:
        self.space.check_subset(subset)
        if not self.contains(subset):
            raise NotAMemberError(
                f"{name} is not a member of the {self.kind.value} semiring",
                {"points": subset.indices()},
            )

    def subtract(self, first: Subset, second: Subset) -> List[Subset]:
        """Disjoint members whose union is first - second; at most k of them."""
        self.require_member(first, "S")
        self.require_member(second, "T")

        pieces = [piece for piece in self._subtract(first, second) if not piece.is_empty]

        covered = 0
        for piece in pieces:
            if covered & piece.mask:
                raise InternalInvariantError(f"{self.kind.value} subtraction produced overlapping pieces")
            covered |= piece.mask
        if covered != (first - second).mask:
            raise InternalInvariantError(f"{self.kind.value} subtraction does not cover the difference")
        if len(pieces) > self.k:
            raise InternalInvariantError(
                f"{self.kind.value} subtraction produced {len(pieces)} pieces, k={self.k}"
            )
        return pieces

    # --------------------------------------------------------
    # ENUMERATION
    # --------------------------------------------------------
    @abstractmethod
    def member_count_estimate(self) -> int:
        """Upper bound on the number of members (duplicates included)."""

    @abstractmethod
    def iter_members(self) -> Iterator[Subset]:
        """Every member at least once; may repeat."""

    @property
    def exact_enumeration_feasible(self) -> bool:
        return self.member_count_estimate() <= current_settings().ENUMERATION_CAP

    def enumerate_members(self, budget: Optional[int] = None) -> Iterator[Subset]:
        """
        Distinct members. Raises EnumerationBudgetExceeded when more than
        `budget` distinct members exist.
        """
        if budget is None:
            if not self.exact_enumeration_feasible:
                raise ExactSearchInfeasibleError(
                    f"{self.kind.value} semiring has too many members to enumerate",
                    self.member_count_estimate(),
                )
            budget = self.member_count_estimate()

        seen = set()
        for member in self.iter_members():
            if member.mask in seen:
                continue
            if len(seen) >= budget:
                raise EnumerationBudgetExceeded(budget, len(seen))
            seen.add(member.mask)
            yield member

    def member_batches(self, batch_size: Optional[int] = None) -> Iterator[np.ndarray]:
        """Member indicators stacked into boolean matrices of at most batch_size rows."""
        batch_size = batch_size or current_settings().BATCH_SIZE
        rows = []
        for member in self.iter_members():
            rows.append(member.indicator())
            if len(rows) == batch_size:
                yield np.vstack(rows)
                rows = []
        if rows:
            yield np.vstack(rows)

    @abstractmethod
    def random_member(self, rng: np.random.Generator) -> Subset:
        ...

    # --------------------------------------------------------
    # WITNESS SEARCH
    # --------------------------------------------------------
    def search_size(self) -> int:
        """Number of candidates the exact maximiser scans."""
        return self.member_count_estimate()

    @property
    def exact_search_feasible(self) -> bool:
        return self.search_size() <= current_settings().ENUMERATION_CAP

    def require_exact(self) -> None:
        if not self.exact_search_feasible:
            raise ExactSearchInfeasibleError(
                f"Exact search over the {self.kind.value} semiring would scan ~{self.search_size()} candidates",
                self.search_size(),
            )

    def _check_mass(self, mass: np.ndarray) -> np.ndarray:
        mass = np.asarray(mass, dtype=np.float64)
        if mass.shape != (self.size,):
            raise PreconditionError(f"Mass vector has shape {mass.shape}, expected ({self.size},)")
        return mass

    def maximize(self, mass: np.ndarray) -> Candidate:
        """
        The member S maximising sum_{x in S} mass(x). The value is never
        negative (the empty set is a member); ties go to the smallest mask.
        """
        mass = self._check_mass(mass)
        self.require_exact()
        tracker = ArgmaxTracker(self.size)
        for rows in self.member_batches():
            tracker.offer_rows(rows @ mass, lambda row, rows=rows: Subset.from_indicator(rows[row]))
        return tracker.best

    def maximize_rows(self, mass_rows: np.ndarray) -> Tuple[np.ndarray, RowChooser]:
        """Row-wise maximize: best values per row plus a function building the row's maximiser."""
        candidates = [self.maximize(row) for row in mass_rows]
        values = np.array([candidate.value for candidate in candidates], dtype=np.float64)
        return values, lambda row: candidates[row].subset

    def heuristic_maximize(
        self,
        mass: np.ndarray,
        rng: np.random.Generator,
        restarts: int,
        start: Optional[Subset] = None,
    ) -> Candidate:
        """
        A lower bound for maximize with its member. Single-factor families
        have nothing to alternate over: their one alternating step is the
        closed-form maximize, so it is returned whenever the scan fits
        ENUMERATION_CAP. Past the cap this keeps the best of start and
        `restarts` random members.
        """
        mass = self._check_mass(mass)
        if self.exact_search_feasible:
            return self.maximize(mass)

        tracker = ArgmaxTracker(self.size)
        if start is not None:
            tracker.offer(float(start.indicator() @ mass), start)
        for _ in range(restarts):
            member = self.random_member(rng)
            tracker.offer(float(member.indicator() @ mass), member)
        return tracker.best


# ------------------------------------------------------------
# ALGEBRAS (k = 1)
# ------------------------------------------------------------
class AlgebraSemiring(Semiring):
    """All unions of cells of a generating partition."""
    kind = SemiringKind.Algebra

    def __init__(self, space: GroundSpace, partition: Partition):
        space.check_partition(partition)
        super().__init__(space, 1)
        self.partition = partition
        self.cell_masks = [cell.mask for cell in partition]
        self._cell_sizes = np.bincount(partition.labels, minlength=len(partition))
        self._cell_matrix = partition.cell_matrix().astype(np.float64)

    @property
    def atoms(self) -> int:
        return len(self.partition)

    def _union(self, chosen: np.ndarray) -> Subset:
        mask = 0
        for index in np.flatnonzero(chosen):
            mask |= self.cell_masks[index]
        return Subset(mask, self.size)

    def closure(self, subset: Subset) -> Subset:
        hit = np.bincount(self.partition.labels, weights=subset.indicator(), minlength=self.atoms) > 0
        return self._union(hit)

    def contains(self, subset: Subset) -> bool:
        self.space.check_subset(subset)
        counts = np.bincount(self.partition.labels, weights=subset.indicator(), minlength=self.atoms)
        return bool(np.all((counts == 0) | (counts == self._cell_sizes)))

    def _subtract(self, first: Subset, second: Subset) -> List[Subset]:
        return [first - second]

    def minimal_member(self, index: int) -> Subset:
        return self.partition.cells[int(self.partition.labels[index])]

    def member_count_estimate(self) -> int:
        return 2 ** self.atoms

    def iter_members(self) -> Iterator[Subset]:
        for rows in self.member_batches():
            for row in rows:
                yield Subset.from_indicator(row)

    def member_batches(self, batch_size: Optional[int] = None) -> Iterator[np.ndarray]:
        batch_size = batch_size or current_settings().BATCH_SIZE
        for codes in _code_batches(2 ** self.atoms, batch_size):
            yield _code_bits(codes, self.atoms)[:, self.partition.labels]

    def random_member(self, rng: np.random.Generator) -> Subset:
        return self._union(rng.integers(0, 2, self.atoms).astype(bool))

    def search_size(self) -> int:
        return self.atoms

    def maximize(self, mass: np.ndarray) -> Candidate:
        mass = self._check_mass(mass)
        sums = np.bincount(self.partition.labels, weights=mass, minlength=self.atoms)
        chosen = sums > current_settings().TIE_TOLERANCE
        return Candidate(float(sums[chosen].sum()), self._union(chosen))

    def maximize_rows(self, mass_rows: np.ndarray) -> Tuple[np.ndarray, RowChooser]:
        sums = mass_rows @ self._cell_matrix.T
        chosen = sums > current_settings().TIE_TOLERANCE
        values = np.where(chosen, sums, 0.0).sum(axis=1)
        return values, lambda row: self._union(chosen[row])


# ------------------------------------------------------------
# INTERVALS (k = 2)
# ------------------------------------------------------------
class IntervalSemiring(Semiring):
    """Intervals of a linear order on the points, plus the empty set."""
    kind = SemiringKind.Intervals

    def __init__(self, space: GroundSpace, order: Sequence[int]):
        order = [int(i) for i in order]
        if sorted(order) != list(range(space.size)):
            raise PreconditionError("Interval order must be a permutation of the points")
        super().__init__(space, 2)
        self.order = np.array(order, dtype=np.int64)
        self.rank = np.empty(space.size, dtype=np.int64)
        self.rank[self.order] = np.arange(space.size)

    def interval(self, low: int, high: int) -> Subset:
        """Points with rank in low..high (empty when low > high)."""
        if low > high:
            return Subset.empty(self.size)
        return Subset.from_indices(self.order[low:high + 1].tolist(), self.size)

    def bounds(self, subset: Subset) -> Tuple[int, int]:
        ranks = self.rank[subset.indicator()]
        return int(ranks.min()), int(ranks.max())

    def contains(self, subset: Subset) -> bool:
        self.space.check_subset(subset)
        if subset.is_empty:
            return True
        low, high = self.bounds(subset)
        return high - low + 1 == len(subset)

    def _subtract(self, first: Subset, second: Subset) -> List[Subset]:
        if first.is_empty:
            return []
        if second.is_empty:
            return [first]
        a, b = self.bounds(first)
        c, d = self.bounds(second)
        return [self.interval(a, min(b, c - 1)), self.interval(max(a, d + 1), b)]

    def minimal_member(self, index: int) -> Subset:
        return Subset(1 << index, self.size)

    def member_count_estimate(self) -> int:
        return self.size * (self.size + 1) // 2 + 1

    def iter_members(self) -> Iterator[Subset]:
        yield Subset.empty(self.size)
        for low in range(self.size):
            for high in range(low, self.size):
                yield self.interval(low, high)

    def random_member(self, rng: np.random.Generator) -> Subset:
        low, high = sorted(int(x) for x in rng.integers(0, self.size, 2))
        return self.interval(low, high)

    def search_size(self) -> int:
        return self.size * self.size

    def _interval_values(self, mass_rows: np.ndarray) -> np.ndarray:
        # values[b, i, j] = mass of the interval with ranks i..j (only i <= j is meaningful)
        ordered = mass_rows[:, self.order]
        prefix = np.concatenate([np.zeros((ordered.shape[0], 1)), np.cumsum(ordered, axis=1)], axis=1)
        values = prefix[:, None, 1:] - prefix[:, :-1, None]
        upper = np.triu(np.ones((self.size, self.size), dtype=bool))
        return np.where(upper, values, -np.inf)

    def maximize(self, mass: np.ndarray) -> Candidate:
        mass = self._check_mass(mass)
        values = self._interval_values(mass[None, :])[0].ravel()
        tracker = ArgmaxTracker(self.size)
        tracker.offer_rows(values, lambda flat: self.interval(flat // self.size, flat % self.size))
        return tracker.best

    def maximize_rows(self, mass_rows: np.ndarray) -> Tuple[np.ndarray, RowChooser]:
        values = self._interval_values(mass_rows).reshape(mass_rows.shape[0], -1).max(axis=1)
        return np.maximum(values, 0.0), lambda row: self.maximize(mass_rows[row]).subset


# ------------------------------------------------------------
# INTERSECTIONS OF ALGEBRAS (k = number of algebras)
# ------------------------------------------------------------
class IntersectionSemiring(Semiring):
    """
    Members are intersections U_1 & ... & U_k with U_i a union of atoms of
    the i-th algebra. Each algebra is given by the atom label of every point.
    Cylinder families and hypercube insensitive sets are built this way.
    """
    kind = SemiringKind.Intersection

    def __init__(self, space: GroundSpace, atom_labels: Sequence[Sequence], kind: Optional[SemiringKind] = None):
        if not atom_labels:
            raise PreconditionError("An intersection semiring needs at least one algebra")
        super().__init__(space, len(atom_labels))
        if kind is not None:
            self.kind = kind

        self.labels: List[np.ndarray] = []
        self.atom_counts: List[int] = []
        self._atom_matrices: List[np.ndarray] = []
        for raw in atom_labels:
            raw = np.asarray(raw)
            if raw.shape != (space.size,):
                raise PreconditionError(f"Atom labels must give one label per point ({space.size})")
            _, labels = np.unique(raw, return_inverse=True)
            labels = labels.ravel().astype(np.int64)
            self.labels.append(labels)
            self.atom_counts.append(int(labels.max()) + 1)
            self._atom_matrices.append(Partition.from_labels(labels).cell_matrix().astype(np.float64))

        # The algebra with the most atoms is optimised in closed form
        self._last = int(np.argmax(self.atom_counts))
        self._others = [i for i in range(self.k) if i != self._last]

    # --------------------------------------------------------
    # STRUCTURE
    # --------------------------------------------------------
    def closure_indicator(self, algebra: int, indicator: np.ndarray) -> np.ndarray:
        """Union of the algebra's atoms that meet the set."""
        labels = self.labels[algebra]
        hit = np.bincount(labels, weights=indicator.astype(np.float64), minlength=self.atom_counts[algebra]) > 0
        return hit[labels]

    def contains(self, subset: Subset) -> bool:
        self.space.check_subset(subset)
        indicator = subset.indicator()
        closed = np.ones(self.size, dtype=bool)
        for algebra in range(self.k):
            closed &= self.closure_indicator(algebra, indicator)
        return bool(np.array_equal(closed, indicator))

    def _subtract(self, first: Subset, second: Subset) -> List[Subset]:
        if first.is_empty:
            return []
        a = first.indicator()
        b = second.indicator()
        first_parts = [self.closure_indicator(i, a) for i in range(self.k)]
        second_parts = [self.closure_indicator(i, b) for i in range(self.k)]

        pieces = []
        prefix = np.ones(self.size, dtype=bool)
        for j in range(self.k):
            piece = prefix & first_parts[j] & ~second_parts[j]
            for i in range(j + 1, self.k):
                piece &= first_parts[i]
            pieces.append(Subset.from_indicator(piece))
            prefix &= first_parts[j] & second_parts[j]
        return pieces

    def minimal_member(self, index: int) -> Subset:
        indicator = np.ones(self.size, dtype=bool)
        for labels in self.labels:
            indicator &= labels == labels[index]
        return Subset.from_indicator(indicator)

    # --------------------------------------------------------
    # ENUMERATION
    # --------------------------------------------------------
    def member_count_estimate(self) -> int:
        return 2 ** sum(self.atom_counts)

    def _rows_for(self, algebras: Sequence[int], codes: np.ndarray) -> np.ndarray:
        rows = np.ones((codes.size, self.size), dtype=bool)
        offset = 0
        for algebra in algebras:
            width = self.atom_counts[algebra]
            bits = _code_bits(codes >> offset, width)
            rows &= bits[:, self.labels[algebra]]
            offset += width
        return rows

    def member_batches(self, batch_size: Optional[int] = None) -> Iterator[np.ndarray]:
        if not self.exact_enumeration_feasible:
            raise ExactSearchInfeasibleError(
                f"{self.kind.value} semiring has too many members to enumerate",
                self.member_count_estimate(),
            )
        batch_size = batch_size or current_settings().BATCH_SIZE
        for codes in _code_batches(self.member_count_estimate(), batch_size):
            yield self._rows_for(range(self.k), codes)

    def iter_members(self) -> Iterator[Subset]:
        for rows in self.member_batches():
            for row in rows:
                yield Subset.from_indicator(row)

    def random_member(self, rng: np.random.Generator) -> Subset:
        indicator = np.ones(self.size, dtype=bool)
        for labels, count in zip(self.labels, self.atom_counts):
            indicator &= rng.integers(0, 2, count).astype(bool)[labels]
        return Subset.from_indicator(indicator)

    # --------------------------------------------------------
    # WITNESS SEARCH
    # --------------------------------------------------------
    def search_size(self) -> int:
        return 2 ** sum(self.atom_counts[i] for i in self._others)

    def maximize(self, mass: np.ndarray) -> Candidate:
        mass = self._check_mass(mass)
        self.require_exact()
        settings = current_settings()
        last_labels = self.labels[self._last]
        atom_matrix = self._atom_matrices[self._last]
        tracker = ArgmaxTracker(self.size)

        for codes in _code_batches(self.search_size(), settings.BATCH_SIZE):
            rows = self._rows_for(self._others, codes)
            sums = (rows * mass) @ atom_matrix.T
            chosen = sums > settings.TIE_TOLERANCE
            values = np.where(chosen, sums, 0.0).sum(axis=1)
            tracker.offer_rows(
                values,
                lambda row, rows=rows, chosen=chosen: Subset.from_indicator(rows[row] & chosen[row][last_labels]),
            )
        return tracker.best

    def heuristic_maximize(
        self,
        mass: np.ndarray,
        rng: np.random.Generator,
        restarts: int,
        start: Optional[Subset] = None,
    ) -> Candidate:
        """Alternating maximisation over the algebras, one closed-form step at a time."""
        mass = self._check_mass(mass)
        tol = current_settings().TIE_TOLERANCE
        tracker = ArgmaxTracker(self.size)

        starts = []
        if start is not None:
            indicator = start.indicator()
            starts.append([self.closure_indicator(i, indicator) for i in range(self.k)])
        for _ in range(restarts):
            starts.append([
                rng.integers(0, 2, count).astype(bool)[labels]
                for labels, count in zip(self.labels, self.atom_counts)
            ])

        for parts in starts:
            current = float(np.logical_and.reduce(parts) @ mass)
            improved = True
            while improved:
                improved = False
                for j in range(self.k):
                    others = np.logical_and.reduce([parts[i] for i in range(self.k) if i != j]) \
                        if self.k > 1 else np.ones(self.size, dtype=bool)
                    sums = np.bincount(self.labels[j], weights=mass * others, minlength=self.atom_counts[j])
                    chosen = sums > tol
                    value = float(sums[chosen].sum())
                    if value > current + tol:
                        parts[j] = chosen[self.labels[j]]
                        current = value
                        improved = True
            tracker.offer(current, Subset.from_indicator(np.logical_and.reduce(parts)))
        return tracker.best
