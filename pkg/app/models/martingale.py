# app/models/martingale.py

from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple

from app.core.exceptions import DimensionMismatchError, PreconditionError
from app.models.measure import GroundSpace, Partition, RandomVar


@dataclass(frozen=True)
class Filtration:
    """Partitions P_0, P_1, ... of one space, each refining its predecessor."""
    partitions: Tuple[Partition, ...]

    def __post_init__(self):
        partitions = tuple(self.partitions)
        if not partitions:
            raise PreconditionError("A filtration needs at least one partition")
        size = partitions[0].size
        for level, (coarse, fine) in enumerate(zip(partitions, partitions[1:]), start=1):
            if fine.size != size:
                raise DimensionMismatchError(f"Partition {level} of the filtration lives on another space")
            if not fine.refines(coarse):
                raise PreconditionError(f"Partition {level} does not refine partition {level - 1}")
        object.__setattr__(self, "partitions", partitions)

    @classmethod
    def of(cls, partitions: Sequence[Partition]) -> "Filtration":
        return cls(tuple(partitions))

    @property
    def size(self) -> int:
        return self.partitions[0].size

    def __len__(self) -> int:
        return len(self.partitions)

    def __iter__(self) -> Iterator[Partition]:
        return iter(self.partitions)

    def __getitem__(self, level: int) -> Partition:
        return self.partitions[level]

    def check_space(self, space: GroundSpace) -> None:
        if self.size != space.size:
            raise DimensionMismatchError(
                f"Filtration covers {self.size} points, space has {space.size}",
                {"filtration": self.size, "space": space.size},
            )


@dataclass(frozen=True)
class DifferenceSequence:
    """d_0 = E(f|P_0) and d_i = E(f|P_i) - E(f|P_{i-1}) along a filtration."""
    terms: Tuple[RandomVar, ...]
    filtration: Filtration

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[RandomVar]:
        return iter(self.terms)

    def __getitem__(self, i: int) -> RandomVar:
        return self.terms[i]

    def partial_sum(self, low: int, high: int) -> RandomVar:
        """d_low + ... + d_high (zero when low > high)."""
        total = RandomVar.constant(0.0, self.filtration.size)
        for term in self.terms[low:high + 1]:
            total = total + term
        return total

    def total(self) -> RandomVar:
        return self.partial_sum(0, len(self.terms) - 1)
