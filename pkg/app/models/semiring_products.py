# app/models/semiring_products.py

from __future__ import annotations

import functools
import itertools
import math
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import current_settings
from app.core.exceptions import PreconditionError
from app.models.enums import SemiringKind
from app.models.measure import GroundSpace, Subset
from app.models.semiring import ArgmaxTracker, Candidate, Semiring, _code_batches, _code_bits


def _outer_subset(parts: Sequence[np.ndarray]) -> Subset:
    return Subset.from_indicator(functools.reduce(np.logical_and.outer, parts).ravel())


# ------------------------------------------------------------
# PRODUCTS (k = sum of the factors' k)
# ------------------------------------------------------------
class ProductSemiring(Semiring):
    """
    Products S_1 x ... x S_d of factor members on the product space.
    Differences are split coordinate by coordinate:
    S - T = U_j (S_1&T_1) x ... x (S_{j-1}&T_{j-1}) x (S_j - T_j) x S_{j+1} x ... x S_d.
    """
    kind = SemiringKind.Product

    def __init__(self, factors: Sequence[Semiring], space: Optional[GroundSpace] = None, kind: Optional[SemiringKind] = None):
        if not factors:
            raise PreconditionError("A product semiring needs at least one factor")
        expected = GroundSpace.product(*(factor.space for factor in factors))
        if space is None:
            space = expected
        elif not space.same_as(expected):
            raise PreconditionError("Product space does not match the factor spaces")
        super().__init__(space, sum(factor.k for factor in factors))
        if kind is not None:
            self.kind = kind
        self.factors = tuple(factors)
        self.shape = tuple(factor.size for factor in factors)

    # --------------------------------------------------------
    # STRUCTURE
    # --------------------------------------------------------
    def projections(self, subset: Subset) -> List[Subset]:
        grid = subset.indicator().reshape(self.shape)
        parts = []
        for axis in range(len(self.shape)):
            others = tuple(i for i in range(len(self.shape)) if i != axis)
            parts.append(Subset.from_indicator(grid.any(axis=others) if others else grid))
        return parts

    def compose(self, parts: Sequence[Subset]) -> Subset:
        return _outer_subset([part.indicator() for part in parts])

    def contains(self, subset: Subset) -> bool:
        self.space.check_subset(subset)
        if subset.is_empty:
            return True
        parts = self.projections(subset)
        if self.compose(parts) != subset:
            return False
        return all(factor.contains(part) for factor, part in zip(self.factors, parts))

    def _subtract(self, first: Subset, second: Subset) -> List[Subset]:
        if first.is_empty:
            return []
        first_parts = self.projections(first)
        if second.is_empty:
            return [first]
        second_parts = self.projections(second)

        pieces = []
        for j, factor in enumerate(self.factors):
            prefix = [a & b for a, b in zip(first_parts[:j], second_parts[:j])]
            for remainder in factor.subtract(first_parts[j], second_parts[j]):
                pieces.append(self.compose(prefix + [remainder] + first_parts[j + 1:]))
        return pieces

    def minimal_member(self, index: int) -> Subset:
        coordinates = np.unravel_index(index, self.shape)
        return self.compose([factor.minimal_member(int(c)) for factor, c in zip(self.factors, coordinates)])

    # --------------------------------------------------------
    # ENUMERATION
    # --------------------------------------------------------
    def member_count_estimate(self) -> int:
        return math.prod(factor.member_count_estimate() for factor in self.factors)

    def iter_members(self) -> Iterator[Subset]:
        members = [list(factor.enumerate_members()) for factor in self.factors]
        for parts in itertools.product(*members):
            yield self.compose(parts)

    def random_member(self, rng: np.random.Generator) -> Subset:
        return self.compose([factor.random_member(rng) for factor in self.factors])

    # --------------------------------------------------------
    # WITNESS SEARCH
    # --------------------------------------------------------
    def _head(self) -> Semiring:
        head = self.factors[:-1]
        return head[0] if len(head) == 1 else ProductSemiring(head)

    def search_size(self) -> int:
        if len(self.factors) == 1:
            return self.factors[0].search_size()
        return self._head().member_count_estimate()

    def maximize(self, mass: np.ndarray) -> Candidate:
        """
        Enumerates members of all factors but the last and hands the
        resulting marginal mass to the last factor's own maximiser.
        """
        mass = self._check_mass(mass)
        if len(self.factors) == 1:
            candidate = self.factors[0].maximize(mass)
            return Candidate(candidate.value, candidate.subset)
        self.require_exact()

        last = self.factors[-1]
        head = self._head()
        grid = mass.reshape(head.size, last.size)
        tracker = ArgmaxTracker(self.size)

        for rows in head.member_batches():
            values, choose = last.maximize_rows(rows @ grid)
            tracker.offer_rows(
                values,
                lambda row, rows=rows, choose=choose: _outer_subset([rows[row], choose(row).indicator()]),
            )
        return tracker.best

    def heuristic_maximize(
        self,
        mass: np.ndarray,
        rng: np.random.Generator,
        restarts: int,
        start: Optional[Subset] = None,
    ) -> Candidate:
        """Alternating maximisation: optimise one factor with the others fixed until nothing improves."""
        mass = self._check_mass(mass)
        tol = current_settings().TIE_TOLERANCE
        tensor = mass.reshape(self.shape)
        tracker = ArgmaxTracker(self.size)

        starts = []
        if start is not None and not start.is_empty:
            starts.append(self.projections(start))
        for _ in range(restarts):
            starts.append([factor.random_member(rng) for factor in self.factors])

        for parts in starts:
            current = float(self.compose(parts).indicator() @ mass)
            improved = True
            while improved:
                improved = False
                for j, factor in enumerate(self.factors):
                    # Mass seen by factor j with every other factor held at its current member
                    held = functools.reduce(np.multiply.outer, [
                        np.ones(size) if axis == j else parts[axis].indicator().astype(np.float64)
                        for axis, size in enumerate(self.shape)
                    ])
                    others = tuple(axis for axis in range(len(self.shape)) if axis != j)
                    marginal = (tensor * held).sum(axis=others) if others else tensor * held
                    candidate = factor.maximize(marginal) if factor.exact_search_feasible \
                        else factor.heuristic_maximize(marginal, rng, 1, parts[j])
                    if candidate.value > current + tol:
                        parts[j] = candidate.subset
                        current = candidate.value
                        improved = True
            tracker.offer(current, self.compose(parts))
        return tracker.best


# ------------------------------------------------------------
# SYMMETRIC RECTANGLES (k = 4)
# ------------------------------------------------------------
class SymmetricRectangleSemiring(Semiring):
    """Rectangles S x T on Omega x Omega with S = T or S & T empty."""
    kind = SemiringKind.SymmetricRectangles

    def __init__(self, base: GroundSpace):
        super().__init__(GroundSpace.product(base, base), 4)
        self.base = base
        self.n = base.size

    # --------------------------------------------------------
    # STRUCTURE
    # --------------------------------------------------------
    def sides(self, subset: Subset) -> Tuple[Subset, Subset]:
        grid = subset.indicator().reshape(self.n, self.n)
        return Subset.from_indicator(grid.any(axis=1)), Subset.from_indicator(grid.any(axis=0))

    def rectangle(self, rows: Subset, columns: Subset) -> Subset:
        return _outer_subset([rows.indicator(), columns.indicator()])

    def contains(self, subset: Subset) -> bool:
        self.space.check_subset(subset)
        if subset.is_empty:
            return True
        rows, columns = self.sides(subset)
        if self.rectangle(rows, columns) != subset:
            return False
        return rows == columns or rows.isdisjoint(columns)

    def _subtract(self, first: Subset, second: Subset) -> List[Subset]:
        if first.is_empty:
            return []
        if second.is_empty:
            return [first]
        s, t = self.sides(first)
        c, d = self.sides(second)
        rect = self.rectangle

        if s != t:
            return [rect(s - c, t), rect(s & c, t - d)]

        a = s
        if c == d:
            inner = a & c
            rest = a - inner
            return [rect(rest, rest), rect(rest, inner), rect(inner, rest)]

        c_in, d_in = a & c, a & d
        rest = a - (c_in | d_in)
        left = c_in | rest
        return [rect(left, left), rect(d_in, d_in), rect(d_in, left), rect(rest, d_in)]

    def split_rectangle(self, rows: Subset, columns: Subset) -> List[Subset]:
        """Any rectangle as at most 4 disjoint members, via S&T, S-T and T-S."""
        both = rows & columns
        only_rows = rows - columns
        only_columns = columns - rows
        pieces = [
            self.rectangle(both, both),
            self.rectangle(both, only_columns),
            self.rectangle(only_rows, both),
            self.rectangle(only_rows, only_columns),
        ]
        return [piece for piece in pieces if not piece.is_empty]

    def minimal_member(self, index: int) -> Subset:
        return Subset(1 << index, self.size)

    # --------------------------------------------------------
    # ENUMERATION
    # --------------------------------------------------------
    def member_count_estimate(self) -> int:
        return 2 ** self.n + 3 ** self.n

    def iter_members(self) -> Iterator[Subset]:
        for code in range(2 ** self.n):
            side = Subset(code, self.n)
            yield self.rectangle(side, side)
        for assignment in itertools.product((0, 1, 2), repeat=self.n):
            assignment = np.array(assignment)
            yield self.rectangle(Subset.from_indicator(assignment == 1), Subset.from_indicator(assignment == 2))

    def random_member(self, rng: np.random.Generator) -> Subset:
        assignment = rng.integers(0, 3, self.n)
        rows = Subset.from_indicator(assignment == 1)
        if rng.random() < 0.5:
            return self.rectangle(rows, rows)
        return self.rectangle(rows, Subset.from_indicator(assignment == 2))

    # --------------------------------------------------------
    # WITNESS SEARCH
    # --------------------------------------------------------
    def search_size(self) -> int:
        return 2 ** self.n

    def maximize(self, mass: np.ndarray) -> Candidate:
        """
        For every side S: the square S x S, and the best S x T with T
        outside S, whose columns are chosen in closed form.
        """
        mass = self._check_mass(mass)
        self.require_exact()
        settings = current_settings()
        grid = mass.reshape(self.n, self.n)
        tracker = ArgmaxTracker(self.size)

        for codes in _code_batches(2 ** self.n, settings.BATCH_SIZE):
            sides = _code_bits(codes, self.n)
            weights = sides.astype(np.float64)
            squares = np.einsum("bi,ij,bj->b", weights, grid, weights)
            tracker.offer_rows(
                squares,
                lambda row, sides=sides: _outer_subset([sides[row], sides[row]]),
            )

            columns = weights @ grid
            chosen = ~sides & (columns > settings.TIE_TOLERANCE)
            pairs = np.where(chosen, columns, 0.0).sum(axis=1)
            tracker.offer_rows(
                pairs,
                lambda row, sides=sides, chosen=chosen: _outer_subset([sides[row], chosen[row]]),
            )
        return tracker.best

    def _best_disjoint(self, sums: np.ndarray, fixed: np.ndarray, tol: float) -> Tuple[np.ndarray, float]:
        chosen = ~fixed & (sums > tol)
        return chosen, float(sums[chosen].sum())

    def heuristic_maximize(
        self,
        mass: np.ndarray,
        rng: np.random.Generator,
        restarts: int,
        start: Optional[Subset] = None,
    ) -> Candidate:
        """
        Squares by single-point flips, disjoint pairs by alternating the two
        sides in closed form.
        """
        mass = self._check_mass(mass)
        tol = current_settings().TIE_TOLERANCE
        grid = mass.reshape(self.n, self.n)
        diagonal = np.diag(grid)
        tracker = ArgmaxTracker(self.size)

        square_starts, pair_starts = [], []
        if start is not None and not start.is_empty:
            rows, columns = self.sides(start)
            if rows == columns:
                square_starts.append(rows.indicator())
            else:
                pair_starts.append((rows.indicator(), columns.indicator()))
        for _ in range(restarts):
            square_starts.append(rng.integers(0, 2, self.n).astype(bool))
            pair_starts.append((rng.integers(0, 2, self.n).astype(bool), None))

        for side in square_starts:
            side = side.copy()
            while True:
                weights = side.astype(np.float64)
                through = grid @ weights + grid.T @ weights
                gains = np.where(side, diagonal - through, through + diagonal)
                best = int(np.argmax(gains))
                if gains[best] <= tol:
                    break
                side[best] = ~side[best]
            weights = side.astype(np.float64)
            tracker.offer(float(weights @ grid @ weights), _outer_subset([side, side]))

        for rows, columns in pair_starts:
            if columns is None:
                columns, _ = self._best_disjoint(rows.astype(np.float64) @ grid, rows, tol)
            current = float(rows.astype(np.float64) @ grid @ columns.astype(np.float64))
            while True:
                new_columns, value = self._best_disjoint(rows.astype(np.float64) @ grid, rows, tol)
                if value > current + tol:
                    columns, current = new_columns, value
                new_rows, value = self._best_disjoint(grid @ columns.astype(np.float64), columns, tol)
                if value > current + tol:
                    rows, current = new_rows, value
                    continue
                break
            tracker.offer(current, _outer_subset([rows, columns]))
        return tracker.best
