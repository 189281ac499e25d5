# app/services/measure_service.py

import numpy as np

from app.core.exceptions import DimensionMismatchError, PreconditionError
from app.models.measure import GroundSpace, Partition, RandomVar, Subset


def lp_norm(f: RandomVar, space: GroundSpace, p: float) -> float:
    """(sum_x w(x)|f(x)|^p)^(1/p)."""
    space.check_var(f)
    if not p >= 1:
        raise PreconditionError(f"L_p norms need p >= 1, got {p}")
    magnitudes = np.abs(f.values)
    top = float(magnitudes.max())
    if top == 0.0:
        return 0.0
    # Scale by the largest magnitude so large p does not overflow
    scaled = magnitudes / top
    return top * float(space.weights @ scaled ** p) ** (1.0 / p)


def integral_over(f: RandomVar, subset: Subset, space: GroundSpace) -> float:
    space.check_var(f)
    space.check_subset(subset)
    return float((space.weights * f.values) @ subset.indicator())


def expectation(f: RandomVar, space: GroundSpace) -> float:
    space.check_var(f)
    return float(space.weights @ f.values)


def cell_masses(values: np.ndarray, partition: Partition, space: GroundSpace) -> np.ndarray:
    """Per-cell integrals, summed in point order."""
    return np.bincount(partition.labels, weights=space.weights * values, minlength=len(partition))


def cell_probabilities(partition: Partition, space: GroundSpace) -> np.ndarray:
    return np.bincount(partition.labels, weights=space.weights, minlength=len(partition))


def cond_expectation(f: RandomVar, partition: Partition, space: GroundSpace) -> RandomVar:
    """
    E(f | A_P): on each cell the weighted average of f, and 0 on cells
    of probability zero.
    """
    space.check_var(f)
    space.check_partition(partition)

    masses = cell_masses(f.values, partition, space)
    probabilities = cell_probabilities(partition, space)

    averages = np.zeros(len(partition))
    positive = probabilities > 0
    averages[positive] = masses[positive] / probabilities[positive]
    return RandomVar(averages[partition.labels])


def cond_expectation_on(f: RandomVar, subset: Subset, space: GroundSpace) -> float:
    """E(f | S) = (integral of f over S) / P(S), with 0 when P(S) = 0."""
    probability = space.prob(subset)
    if probability <= 0:
        return 0.0
    return integral_over(f, subset, space) / probability


def common_refinement(partition: Partition, subset: Subset) -> Partition:
    """Splits every cell C into C & S and C - S."""
    if partition.size != subset.size:
        raise DimensionMismatchError(
            "Partition and subset live on different spaces", {"partition": partition.size, "subset": subset.size}
        )
    pieces = []
    for cell in partition:
        pieces.append(cell & subset)
        pieces.append(cell - subset)
    return Partition(tuple(pieces))


def join(first: Partition, second: Partition) -> Partition:
    """The coarsest common refinement of two partitions."""
    if first.size != second.size:
        raise DimensionMismatchError("Partitions live on different spaces", {"first": first.size, "second": second.size})
    return Partition.from_labels(first.labels * len(second) + second.labels)


def is_measurable(f: RandomVar, partition: Partition, atol: float) -> bool:
    """True when f is constant (within atol) on every cell."""
    if f.size != partition.size:
        return False
    lows = np.full(len(partition), np.inf)
    highs = np.full(len(partition), -np.inf)
    np.minimum.at(lows, partition.labels, f.values)
    np.maximum.at(highs, partition.labels, f.values)
    return bool(np.all(highs - lows <= atol))
