# app/services/application_service.py

from typing import List, Optional

import numpy as np
from loguru import logger

from app.core.config import current_settings
from app.core.exceptions import ExactSearchInfeasibleError, PreconditionError
from app.core.constants import GROWTH_UNIFORM_PARTITION
from app.models.enums import RunMode
from app.models.growth import GrowthFunction, to_fraction
from app.models.measure import RandomVar, Subset
from app.models.semiring import Semiring
from app.models.structures import HypercubeSpec
from app.schemas.results import (
    CellVerdict,
    Decomposition,
    DensityCheck,
    ExceptionalCells,
    HypercubeReport,
    UniformityReport,
)
from app.services.decompose_service import decompose, oracle_mode
from app.services.measure_service import cond_expectation_on, lp_norm
from app.services.semiring_service import hypercube_insensitive
from app.services.uniformity_service import uniformity_norm


def _check_eta(eta: float, name: str = "eta") -> None:
    if not 0 < eta <= 1:
        raise PreconditionError(f"{name} must lie in (0, 1], got {eta}")


def uniform_partition_growth(eta: float) -> GrowthFunction:
    """F(n) = 8n/eta^2 + 1."""
    eta = to_fraction(eta, "eta")
    return GrowthFunction.affine(8 / eta ** 2, 1, label=f"{GROWTH_UNIFORM_PARTITION}:{eta}")


# ------------------------------------------------------------
# UNIFORM CELLS
# ------------------------------------------------------------
def is_uniform_cell(
    f: RandomVar,
    sr: Semiring,
    S: Subset,
    eta: float,
    *,
    mode: RunMode = RunMode.Exact,
    seed: Optional[int] = None,
) -> CellVerdict:
    """
    S is uniform when |integral of f - E(f|S) over T| <= eta P(S) for every
    member T inside S. Members inside S are exactly the sets T & S, so the
    search runs over the whole semiring with the mass cut down to S.
    """
    _check_eta(eta)
    sr.require_member(S, "S")
    space = sr.space
    probability = space.prob(S)
    if probability <= 0:
        return CellVerdict(cell=S, probability=probability, uniform=True, worst_value=0.0)

    inside = S.indicator()
    centred = RandomVar(np.where(inside, f.values - cond_expectation_on(f, S, space), 0.0))
    result = uniformity_norm(centred, sr, oracle_mode(sr, mode), seed=seed)
    uniform = result.value <= eta * probability + current_settings().TOLERANCE
    return CellVerdict(
        cell=S,
        probability=probability,
        uniform=uniform,
        worst_value=result.value,
        witness=None if uniform else result.witness.set & S,
    )


def omega_is_uniform(f: RandomVar, sr: Semiring, eta: float, *, mode: RunMode = RunMode.Exact) -> CellVerdict:
    """The whole space is uniform exactly when ||f - E(f)||_S <= eta."""
    return is_uniform_cell(f, sr, Subset.full(sr.size), eta, mode=mode)


def exceptional_cells(decomposition: Decomposition, sr: Semiring, eta: float) -> ExceptionalCells:
    """
    The two families that cover every non-uniform cell of P: cells where
    E(|f_err| | S) >= eta/4 and cells with P(S) <= 4 ||f_unf||_S / eta.
    Both carry mass at most eta/2 when ||f_err||_1 <= eta^2/8 and
    ||f_unf||_S <= eta^2 / (8|P|).
    """
    _check_eta(eta)
    space = sr.space
    tol = current_settings().TOLERANCE
    scale = decomposition.certificates.scale
    f_err = decomposition.f_err / scale
    unf_norm = decomposition.certificates.unf_norms[0].measured
    P = decomposition.P

    large_error: List[int] = []
    small_cells: List[int] = []
    for index, cell in enumerate(P):
        probability = space.prob(cell)
        if cond_expectation_on(abs(f_err), cell, space) >= eta / 4:
            large_error.append(index)
        if probability <= 4 * unf_norm / eta:
            small_cells.append(index)

    bound = eta ** 2 / 8
    hypotheses = lp_norm(f_err, space, 1.0) <= bound + tol and unf_norm <= bound / len(P) + tol
    return ExceptionalCells(
        large_error=large_error,
        small_cells=small_cells,
        large_error_mass=float(sum(space.prob(P.cells[i]) for i in large_error)),
        small_cells_mass=float(sum(space.prob(P.cells[i]) for i in small_cells)),
        hypotheses_hold=hypotheses,
    )


def uniform_partition(
    f: RandomVar,
    sr: Semiring,
    p: float,
    eta: float,
    *,
    mode: RunMode = RunMode.Exact,
    strict: bool = False,
    seed: Optional[int] = None,
) -> UniformityReport:
    """
    A partition of members whose non-uniform cells carry mass at most eta:
    decompose with sigma = eta^2/8 and F(n) = 8n/eta^2 + 1, then check
    every cell directly.
    """
    _check_eta(eta)
    tol = current_settings().TOLERANCE
    decomposition = decompose(f, sr, p, eta ** 2 / 8, uniform_partition_growth(eta), mode=mode, strict=strict, seed=seed)
    g = f / decomposition.certificates.scale

    exceptional = exceptional_cells(decomposition, sr, eta)
    cells = [is_uniform_cell(g, sr, S, eta, mode=mode, seed=seed) for S in decomposition.P]
    uniform_mass = float(sum(verdict.probability for verdict in cells if verdict.uniform))
    nonuniform_mass = float(sum(verdict.probability for verdict in cells if not verdict.uniform))

    covered = True
    if exceptional.hypotheses_hold:
        flagged = set(exceptional.large_error) | set(exceptional.small_cells)
        covered = all(verdict.uniform or index in flagged for index, verdict in enumerate(cells))
        if not covered:
            logger.error("❌ A non-uniform cell escaped both exceptional families")

    passed = nonuniform_mass <= eta + tol and decomposition.certificates.passed and covered
    logger.info(f"Uniform partition: {len(cells)} cells, non-uniform mass {nonuniform_mass:.6g} (eta={eta})")
    return UniformityReport(
        partition=decomposition.P,
        cells=cells,
        eta=eta,
        total_uniform_mass=uniform_mass,
        nonuniform_mass=nonuniform_mass,
        exceptional=exceptional,
        decomposition=decomposition,
        size_bound=decomposition.certificates.reg_prime,
        passed=passed,
    )


# ------------------------------------------------------------
# HYPERCUBES
# ------------------------------------------------------------
def _check_hypercube_caps(spec: HypercubeSpec, accept_cost: bool) -> None:
    settings = current_settings()
    if accept_cost:
        logger.warning(f"⚠️ Hypercube caps lifted for |A|={len(spec.alphabet)}, n={spec.n}")
        return
    if len(spec.alphabet) > settings.HYPERCUBE_MAX_ALPHABET or spec.n > settings.HYPERCUBE_MAX_LENGTH:
        raise ExactSearchInfeasibleError(
            f"Hypercube |A|={len(spec.alphabet)}, n={spec.n} exceeds the caps "
            f"|A|<={settings.HYPERCUBE_MAX_ALPHABET}, n<={settings.HYPERCUBE_MAX_LENGTH}",
            len(spec.alphabet) ** spec.n,
            {"alphabet": len(spec.alphabet), "n": spec.n},
        )


def check_relative_densities(D: Subset, sr: Semiring, S: Subset, eps: float) -> DensityCheck:
    """
    |P_T(D) - P_S(D)| <= eps for every member T inside S with |T| >= eps|S|,
    checked over every member of the semiring.
    """
    inside = S.indicator()
    in_d = D.indicator()
    size = int(inside.sum())
    density = float(in_d[inside].sum() / size)
    tol = current_settings().TOLERANCE

    checked = 0
    worst = 0.0
    for rows in sr.member_batches():
        restricted = rows & inside
        sizes = restricted.sum(axis=1)
        admissible = (sizes > 0) & (sizes >= eps * size - tol)
        if not admissible.any():
            continue
        counts = restricted[admissible].astype(np.float64) @ in_d.astype(np.float64)
        gaps = np.abs(counts / sizes[admissible] - density)
        checked += int(admissible.sum())
        worst = max(worst, float(gaps.max()))

    return DensityCheck(cell=S, density=density, checked=checked, worst_gap=worst, passed=worst <= eps + tol)


def hypercube_uniform(
    D: Subset,
    spec: HypercubeSpec,
    eps: float,
    *,
    accept_cost: bool = False,
    mode: RunMode = RunMode.Exact,
    seed: Optional[int] = None,
) -> HypercubeReport:
    """
    Runs uniform_partition on 1_D with eta = eps^2 over the insensitive-set
    semiring of A^n, then checks the relative densities of every uniform
    cell against all admissible members.
    """
    _check_eta(eps, "eps")
    if not spec.all_pairs:
        raise PreconditionError("Hypercube regularity needs the semiring of all symbol pairs")
    _check_hypercube_caps(spec, accept_cost)

    sr = hypercube_insensitive(spec)
    sr.space.check_subset(D)
    report = uniform_partition(RandomVar.indicator_of(D), sr, 2.0, eps ** 2, mode=mode, seed=seed)

    densities = [
        check_relative_densities(D, sr, verdict.cell, eps)
        for verdict in report.cells
        if verdict.uniform and not verdict.cell.is_empty
    ]
    tol = current_settings().TOLERANCE
    passed = (
        report.passed
        and all(check.passed for check in densities)
        and report.total_uniform_mass >= 1 - eps ** 2 - tol
    )
    logger.info(f"Hypercube |A|={len(spec.alphabet)}, n={spec.n}: {len(densities)} uniform cells checked")
    return HypercubeReport(
        uniformity=report,
        eps=eps,
        densities=densities,
        uniform_family_mass=report.total_uniform_mass,
        passed=passed,
    )
