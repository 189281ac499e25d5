# app/services/uniformity_service.py

from typing import Optional

import numpy as np
from loguru import logger

from app.core.config import current_settings
from app.core.exceptions import ExactSearchInfeasibleError, PreconditionError
from app.models.enums import OracleMode
from app.models.measure import GroundSpace, Partition, RandomVar, Subset
from app.models.semiring import AlgebraSemiring, ArgmaxTracker, Candidate, Semiring
from app.schemas.results import ComparisonClause, ComparisonReport, NormResult, Witness
from app.services.measure_service import cond_expectation, integral_over, lp_norm
from app.services.semiring_service import rectangles


def _witness(f: RandomVar, subset: Subset, space: GroundSpace) -> Witness:
    value = integral_over(f, subset, space)
    return Witness(set=subset, value=value, abs_value=abs(value))


def _pick(positive: Candidate, negative: Candidate, size: int) -> Subset:
    tracker = ArgmaxTracker(size)
    tracker.offer(positive.value, positive.subset)
    tracker.offer(negative.value, negative.subset)
    return tracker.subset


def uniformity_norm(
    f: RandomVar,
    sr: Semiring,
    mode: OracleMode = OracleMode.Exact,
    *,
    seed: Optional[int] = None,
    start: Optional[Subset] = None,
) -> NormResult:
    """
    ||f||_S = max over members S of |integral of f over S|.

    Exact mode returns the maximum with the smallest-mask maximiser, or
    raises ExactSearchInfeasibleError. Heuristic mode returns a lower bound
    from alternating maximisation over seeded random restarts.
    """
    sr.space.check_var(f)
    mass = sr.space.weights * f.values
    mode = OracleMode(mode)
    logger.debug(f"Norm on {sr.kind.value} (k={sr.k}, {sr.size} points, ~{sr.search_size()} candidates, {mode.value})")

    if mode == OracleMode.Exact:
        if not sr.exact_search_feasible:
            raise ExactSearchInfeasibleError(
                f"Exact {sr.kind.value} norm would scan ~{sr.search_size()} candidates",
                sr.search_size(),
            )
        positive = sr.maximize(mass)
        negative = sr.maximize(-mass)
    else:
        settings = current_settings()
        seed = settings.DEFAULT_SEED if seed is None else seed
        restarts = settings.HEURISTIC_RESTARTS
        positive = sr.heuristic_maximize(mass, np.random.default_rng(seed), restarts, start)
        negative = sr.heuristic_maximize(-mass, np.random.default_rng(seed + 1), restarts, start)

    witness = _witness(f, _pick(positive, negative, sr.size), sr.space)
    exact = mode == OracleMode.Exact
    return NormResult(value=witness.abs_value, witness=witness, exact=exact)


def find_violating_set(
    f: RandomVar,
    sr: Semiring,
    threshold: float,
    mode: OracleMode = OracleMode.Exact,
    *,
    seed: Optional[int] = None,
) -> Optional[Witness]:
    """
    A member S with |integral of f over S| > threshold, or None. The strict
    inequality is read as value > threshold + TOLERANCE. In exact mode None
    certifies the norm is at most that; in heuristic mode it certifies nothing.
    """
    if threshold < 0:
        raise PreconditionError(f"Threshold must be nonnegative, got {threshold}")
    result = uniformity_norm(f, sr, mode, seed=seed)
    if result.value > threshold + current_settings().TOLERANCE:
        return result.witness
    return None


def cut_norm_exact(f: RandomVar, base: GroundSpace) -> NormResult:
    """
    ||f||_cut on base x base. For each row set S the best column set is
    read off the signs of the S-marginal column sums, so the scan costs
    2^|base| * |base|.
    """
    cap = current_settings().CUT_NORM_CAP
    if base.size > cap:
        raise ExactSearchInfeasibleError(
            f"Cut norm on a {base.size}-point base exceeds the cap of {cap}",
            2 ** base.size,
            {"cap": cap},
        )
    return uniformity_norm(f, rectangles(base), OracleMode.Exact)


def check_lemma_2_5(
    f: RandomVar,
    sr: Semiring,
    B: Partition,
    *,
    tol: Optional[float] = None,
) -> ComparisonReport:
    """
    Evaluates the three comparison inequalities with exact norms:
    (a) ||f||_S <= ||f||_1, (b) ||E(f|B)||_S <= ||f||_S when every cell
    union of B is a member, and (c) ||f||_S <= ||E(f|S)||_1 <= 2||f||_S when
    S is the algebra of a partition.
    """
    tol = current_settings().TOLERANCE if tol is None else tol
    space = sr.space
    space.check_var(f)
    space.check_partition(B)

    if not all(sr.contains(cell) for cell in B):
        raise PreconditionError("Every cell of B must be a member of the semiring")

    norm = uniformity_norm(f, sr).value
    l1 = lp_norm(f, space, 1.0)
    a = ComparisonClause(passed=norm <= l1 + tol, lhs=norm, rhs=l1)

    projected = uniformity_norm(cond_expectation(f, B, space), sr).value
    b = ComparisonClause(passed=projected <= norm + tol, lhs=projected, rhs=norm)

    c = None
    if isinstance(sr, AlgebraSemiring):
        conditional = lp_norm(cond_expectation(f, sr.partition, space), space, 1.0)
        c = ComparisonClause(
            passed=norm <= conditional + tol and conditional <= 2 * norm + tol,
            lhs=norm,
            rhs=conditional,
            upper=2 * norm,
        )

    report = ComparisonReport(a=a, b=b, c=c)
    if not report.passed:
        logger.error(f"❌ Comparison inequalities failed on {sr.kind.value}: {report}")
    return report
