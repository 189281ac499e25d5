# app/services/martingale_service.py

import math
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from app.core.config import current_settings
from app.core.exceptions import DimensionMismatchError, PreconditionError
from app.models.martingale import DifferenceSequence, Filtration
from app.models.measure import GroundSpace, Partition, RandomVar
from app.services.measure_service import cond_expectation, is_measurable, lp_norm


def _check_exponent(p: float) -> None:
    if not 1 < p <= 2:
        raise PreconditionError(f"The martingale inequalities need 1 < p <= 2, got {p}")


def difference_sequence(f: RandomVar, filt: Filtration, space: GroundSpace) -> DifferenceSequence:
    space.check_var(f)
    filt.check_space(space)

    terms = []
    previous: Optional[RandomVar] = None
    for partition in filt:
        current = cond_expectation(f, partition, space)
        terms.append(current if previous is None else current - previous)
        previous = current
    return DifferenceSequence(tuple(terms), filt)


def is_martingale_difference(d: DifferenceSequence, space: GroundSpace, tol: float = 1e-10) -> bool:
    """
    Each d_i is P_i-measurable and, for i >= 1, E(d_i | P_{i-1}) = 0 within tol.
    """
    filt = d.filtration
    if len(d) != len(filt):
        return False
    for i, term in enumerate(d):
        if not is_measurable(term, filt[i], tol):
            logger.debug(f"d_{i} is not measurable for level {i}")
            return False
        if i and float(np.abs(cond_expectation(term, filt[i - 1], space).values).max()) > tol:
            logger.debug(f"E(d_{i} | P_{i - 1}) does not vanish")
            return False
    return True


# ------------------------------------------------------------
# INEQUALITY GAPS (nonnegative up to rounding)
# ------------------------------------------------------------
def rx_inequality_gap(f: RandomVar, filt: Filtration, space: GroundSpace, p: float) -> float:
    """
    (1/(p-1))^(1/2) ||sum d_i||_p - (sum ||d_i||_p^2)^(1/2) for the
    differences of f along filt. At p = 2 the differences are orthogonal
    and the gap is zero.
    """
    _check_exponent(p)
    d = difference_sequence(f, filt, space)
    square_function = math.sqrt(sum(lp_norm(term, space, p) ** 2 for term in d))
    return math.sqrt(1.0 / (p - 1)) * lp_norm(d.total(), space, p) - square_function


def rx_convexity_gap(f: RandomVar, B: Partition, space: GroundSpace, p: float) -> float:
    """||f||^2 - ||E(f|B)||^2 - (p-1)||f - E(f|B)||^2 in L_p."""
    _check_exponent(p)
    conditional = cond_expectation(f, B, space)
    return (
        lp_norm(f, space, p) ** 2
        - lp_norm(conditional, space, p) ** 2
        - (p - 1) * lp_norm(f - conditional, space, p) ** 2
    )


def bcl_inequality_gap(x: RandomVar, y: RandomVar, space: GroundSpace, p: float) -> float:
    """(||x+y||^2 + ||x-y||^2)/2 - ||x||^2 - (p-1)||y||^2 in L_p."""
    _check_exponent(p)
    if x.size != y.size:
        raise DimensionMismatchError(f"x has {x.size} values, y has {y.size}")
    average = (lp_norm(x + y, space, p) ** 2 + lp_norm(x - y, space, p) ** 2) / 2
    return average - lp_norm(x, space, p) ** 2 - (p - 1) * lp_norm(y, space, p) ** 2


def monotone_basis_gap(
    d: DifferenceSequence,
    coefficients: Sequence[float],
    k: int,
    space: GroundSpace,
    p: float,
) -> float:
    """
    ||sum_{i<=n} a_i d_i|| - ||sum_{i<=k} a_i d_i|| in L_p: truncating a
    martingale never increases its norm.
    """
    if p < 1:
        raise PreconditionError(f"L_p norms need p >= 1, got {p}")
    if len(coefficients) != len(d):
        raise DimensionMismatchError(f"{len(coefficients)} coefficients for {len(d)} differences")
    if not 0 <= k < len(d):
        raise PreconditionError(f"Truncation index {k} outside 0..{len(d) - 1}")

    weighted = [term * float(a) for a, term in zip(coefficients, d)]
    full = sum(weighted, RandomVar.constant(0.0, d.filtration.size))
    head = sum(weighted[:k + 1], RandomVar.constant(0.0, d.filtration.size))
    return lp_norm(full, space, p) - lp_norm(head, space, p)


def partial_sum_gap(d: DifferenceSequence, low: int, high: int, space: GroundSpace, p: float) -> float:
    """2||sum_{i<=n} d_i|| - ||sum_{i=low}^{high} d_i|| in L_p."""
    if p < 1:
        raise PreconditionError(f"L_p norms need p >= 1, got {p}")
    if not 0 <= low <= high < len(d):
        raise PreconditionError(f"Block {low}..{high} outside 0..{len(d) - 1}")
    return 2 * lp_norm(d.total(), space, p) - lp_norm(d.partial_sum(low, high), space, p)


def gap_holds(gap: float) -> bool:
    return gap >= -current_settings().GAP_TOLERANCE
