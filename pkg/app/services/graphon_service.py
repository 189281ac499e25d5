# app/services/graphon_service.py

import math
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from app.core.config import current_settings
from app.core.exceptions import ConfigError, InternalInvariantError, PreconditionError
from app.models.growth import GrowthFunction, to_fraction
from app.models.measure import Partition, RandomVar
from app.models.structures import Graphon
from app.schemas.results import GraphonStrongResult, GraphonWeakResult, WeakStep, Witness
from app.services.bounds_service import reg_prime_bound
from app.services.decompose_service import effective_exponent, normalise, run_energy_loop
from app.services.measure_service import common_refinement, cond_expectation, lp_norm
from app.services.semiring_service import rectangles, symmetric_rectangles
from app.services.uniformity_service import cut_norm_exact, uniformity_norm


def _check_eps(eps: float) -> None:
    if not 0 < eps <= 1:
        raise PreconditionError(f"eps must lie in (0, 1], got {eps}")


def _symmetric(values: np.ndarray, n: int) -> RandomVar:
    # Cell sums of S x T and T x S may round differently; a + b == b + a exactly
    matrix = values.reshape(n, n)
    return RandomVar(((matrix + matrix.T) / 2).ravel())


# ------------------------------------------------------------
# PRODUCT PARTITIONS
# ------------------------------------------------------------
def square_partition(R: Partition) -> Partition:
    """R^2 = {S x T : S, T in R} on the product space."""
    labels = R.labels[:, None] * len(R) + R.labels[None, :]
    return Partition.from_labels(labels.ravel())


def base_partition(square: Partition, n: int) -> Partition:
    """Recovers R from R^2: the diagonal point (x, x) lies in R(x) x R(x)."""
    diagonal = np.arange(n) * (n + 1)
    return Partition.from_labels(square.labels[diagonal])


def step_graphon(W: Graphon, R: Partition) -> Graphon:
    """W_R = E(W | R^2)."""
    W.base.check_partition(R)
    averaged = cond_expectation(W.W, square_partition(R), W.space)
    return Graphon(W.base, _symmetric(averaged.values, W.n))


# ------------------------------------------------------------
# STRONG REGULARITY
# ------------------------------------------------------------
def _rectangle_refiner(g: RandomVar, W: Graphon):
    """
    Searches the full rectangle semiring (||.||_Sigma <= ||.||_cut, so a
    certificate on rectangles covers the symmetric ones) and refines the
    base partition by both sides of the witness, keeping Q = Z^2.
    """
    space = W.space
    product = rectangles(W.base)
    tol = current_settings().TOLERANCE

    def refine(Q: Partition, delta: float) -> Optional[Tuple[Partition, Witness]]:
        residual = g - cond_expectation(g, Q, space)
        result = uniformity_norm(residual, product)
        if result.value <= delta + tol:
            return None
        S, T = product.projections(result.witness.set)
        Z = common_refinement(common_refinement(base_partition(Q, W.n), S), T)
        return square_partition(Z), result.witness

    return refine


def graphon_strong_regularity(
    W: Graphon,
    p: float,
    eps: float,
    F: GrowthFunction,
    *,
    strict: bool = False,
    compute_bound: bool = True,
) -> GraphonStrongResult:
    """
    A partition R of the base and U = W_str + W_unf with ||W - U||_p <= eps
    and ||U - U_R||_cut <= h(|R|), where F(n) = (n+1) + sum_{i<=n} 8/h(i).
    """
    _check_eps(eps)
    if F.schedule is None:
        raise ConfigError(f"Strong graphon regularity needs a growth built from a schedule h, got {F.label}")
    p = effective_exponent(p)
    g, scale = normalise(W.W, W.space, p, strict)
    n = W.n
    tol = current_settings().TOLERANCE

    logger.info(f"Strong regularity on a {n}-point base, p={p}, eps={eps}, F={F.label}")
    outcome = run_energy_loop(g, W.space, p, eps, F, _rectangle_refiner(g, W))
    R = base_partition(outcome.P, n)
    Z = base_partition(outcome.Q, n)

    f_P = _symmetric(cond_expectation(g, outcome.P, W.space).values, n)
    f_Q = _symmetric(cond_expectation(g, outcome.Q, W.space).values, n)
    w_err = f_Q - f_P
    w_unf = g - f_Q
    U = Graphon(W.base, _symmetric((f_P + w_unf).values, n))

    err_lp = lp_norm(w_err, W.space, p)
    unf_sigma = uniformity_norm(w_unf, symmetric_rectangles(W.base)).value
    unf_cut = cut_norm_exact(w_unf, W.base).value
    unf_bound = float(1 / F(len(R) ** 2))
    cut_gap = cut_norm_exact(U.W - step_graphon(U, R).W, W.base).value
    cut_gap_bound = float(Fraction(F.schedule(len(R))))

    size_bound = None
    within = True
    if compute_bound:
        report = reg_prime_bound(4, eps, p, F)
        if not report.overflowed:
            size_bound = report.reg_prime
            within = len(R) <= size_bound

    passed = (
        err_lp <= eps + tol
        and unf_sigma <= unf_bound + tol
        and cut_gap <= cut_gap_bound + tol
        and within
    )
    logger.info(f"Strong regularity: |R|={len(R)}, |Z|={len(Z)}, ||W-U||_p={err_lp:.6g}, cut gap {cut_gap:.6g}")
    if passed:
        logger.success("✅ Strong regularity certificates verified")
    else:
        logger.error(f"❌ Strong regularity certificates failed (cut gap {cut_gap:.6g} vs {cut_gap_bound:.6g})")

    return GraphonStrongResult(
        R=R,
        Z=Z,
        U=Graphon(W.base, U.W * scale),
        err_lp=err_lp,
        cut_gap=cut_gap,
        cut_gap_bound=cut_gap_bound,
        unf_sigma_norm=unf_sigma,
        unf_cut_norm=unf_cut,
        unf_bound=unf_bound,
        size_bound=size_bound,
        steps=outcome.steps,
        scale=scale,
        passed=passed,
    )


# ------------------------------------------------------------
# WEAK REGULARITY
# ------------------------------------------------------------
def weak_step_bound(p: float, eps: float) -> int:
    """ceil(1 / ((p-1) eps^2))."""
    return math.ceil(1 / ((to_fraction(p, "p") - 1) * to_fraction(eps, "eps") ** 2))


def graphon_weak_regularity(W: Graphon, p: float, eps: float, *, strict: bool = False) -> GraphonWeakResult:
    """
    Refines the base partition by both sides of an exact cut-norm witness
    of W - W_R until ||W - W_R||_cut <= eps. Each step at most quadruples
    |R| and raises the energy by more than (p-1) eps^2.
    """
    _check_eps(eps)
    p = effective_exponent(p)
    g, scale = normalise(W.W, W.space, p, strict)
    normalised = Graphon(W.base, _symmetric(g.values, W.n))
    product = rectangles(W.base)
    bound = weak_step_bound(p, eps)
    tol = current_settings().TOLERANCE

    R = Partition.trivial(W.n)
    log: List[WeakStep] = []
    while True:
        residual = normalised.W - step_graphon(normalised, R).W
        result = cut_norm_exact(residual, W.base)
        if result.value <= eps + tol:
            break
        if len(log) >= bound:
            raise InternalInvariantError(f"Weak regularity needs more than {bound} steps")

        S, T = product.projections(result.witness.set)
        refined = common_refinement(common_refinement(R, S), T)
        log.append(WeakStep(
            step=len(log) + 1,
            witness_value=result.value,
            cells_before=len(R),
            cells_after=len(refined),
            growth_factor=len(refined) / len(R),
        ))
        logger.debug(f"Weak step {len(log)}: witness {result.value:.6g}, {len(R)} -> {len(refined)} cells")
        R = refined

    passed = len(log) <= bound and all(step.growth_factor <= 4 for step in log)
    logger.info(f"Weak regularity: {len(log)} steps (bound {bound}), |R|={len(R)}, final cut norm {result.value:.6g}")
    if passed:
        logger.success("✅ Weak regularity certificates verified")
    return GraphonWeakResult(
        R=R,
        steps=len(log),
        step_bound=bound,
        final_cut_norm=result.value,
        log=log,
        scale=scale,
        passed=passed,
    )
