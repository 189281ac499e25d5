# app/services/decompose_service.py

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.core.config import current_settings
from app.core.exceptions import BoundOverflow, InternalInvariantError, PreconditionError
from app.models.enums import OracleMode, RunMode
from app.models.growth import GrowthFunction, to_fraction
from app.models.measure import GroundSpace, Partition, RandomVar, Subset
from app.models.semiring import Semiring
from app.schemas.results import (
    Decomposition,
    DecompositionCertificates,
    GreedyApproximation,
    MultiDecomposition,
    StepRecord,
    UnfNormEntry,
    Witness,
)
from app.services.bounds_service import outer_iterations, reg_bound, reg_prime_bound, stage_increment
from app.services.measure_service import common_refinement, cond_expectation, lp_norm
from app.services.semiring_service import is_increasing, power_set
from app.services.uniformity_service import uniformity_norm

# (Q, delta) -> refinement of Q with the witness that produced it, or None
Refiner = Callable[[Partition, float], Optional[Tuple[Partition, Witness]]]


# ------------------------------------------------------------
# INPUT NORMALISATION
# ------------------------------------------------------------
def effective_exponent(p: float) -> float:
    """p > 2 is reduced to 2; p <= 1 is rejected."""
    if not p > 1:
        raise PreconditionError(
            f"p must be greater than 1, got {p}: the energy increment estimates do not hold for p = 1",
            {"p": p},
        )
    if p > 2:
        logger.warning(f"⚠️ p = {p} > 2 reduced to p = 2 (L_p inputs are L_2 inputs on a probability space)")
        return 2.0
    return float(p)


def normalise(f: RandomVar, space: GroundSpace, p: float, strict: bool = False) -> Tuple[RandomVar, float]:
    """
    Returns (f / scale, scale) with ||f / scale||_p <= 1. Inputs that
    already satisfy the bound keep scale 1. Strict mode refuses to rescale
    anything beyond rounding (norm above 1 + TOLERANCE).
    """
    space.check_var(f)
    norm = lp_norm(f, space, p)
    if norm <= 1:
        return f, 1.0
    if norm > 1 + current_settings().TOLERANCE:
        if strict:
            raise PreconditionError(f"||f||_{p} = {norm:.6g} exceeds 1 (strict mode)", {"norm": norm})
        logger.warning(f"⚠️ ||f||_{p} = {norm:.6g} > 1, rescaling to norm 1")
    return f / norm, norm


def _check_sigma(sigma: float) -> None:
    if not 0 < sigma <= 1:
        raise PreconditionError(f"sigma must lie in (0, 1], got {sigma}")


def oracle_mode(sr: Semiring, mode: RunMode) -> OracleMode:
    """Exact runs always use the exact oracle; best-effort runs fall back to the heuristic one."""
    if RunMode(mode) == RunMode.Exact or sr.exact_search_feasible:
        return OracleMode.Exact
    return OracleMode.Heuristic


# ------------------------------------------------------------
# REFINEMENT
# ------------------------------------------------------------
def split_by_witness(Q: Partition, sr: Semiring, S: Subset) -> Partition:
    """
    Splits every cell C of Q into C & S and the members of C - S given by
    the semiring's subtraction. The result refines Q, consists of members,
    and has at most (k+1)|Q| cells.
    """
    pieces = []
    for cell in Q:
        pieces.append(cell & S)
        pieces.extend(sr.subtract(cell, S))
    R = Partition(tuple(pieces))

    if len(R) > (sr.k + 1) * len(Q):
        raise InternalInvariantError(f"Refinement grew from {len(Q)} to {len(R)} cells with k={sr.k}")
    if not R.refines(Q):
        raise InternalInvariantError("Witness refinement does not refine the partition")
    return R


def _find_family_witness(
    residuals: Sequence[RandomVar],
    sr: Semiring,
    delta: float,
    mode: OracleMode,
    seed: Optional[int],
) -> Optional[Tuple[int, Witness]]:
    """The largest witness over all residuals (first index on ties), if it beats delta."""
    threshold = delta + current_settings().TOLERANCE
    best: Optional[Tuple[int, Witness]] = None
    for index, residual in enumerate(residuals):
        result = uniformity_norm(residual, sr, mode, seed=seed)
        if result.value > threshold and (best is None or result.value > best[1].abs_value):
            best = (index, result.witness)
    return best


def _semiring_refiner(f: RandomVar, sr: Semiring, mode: OracleMode, seed: Optional[int]) -> Refiner:
    space = sr.space

    def refine(Q: Partition, delta: float) -> Optional[Tuple[Partition, Witness]]:
        residual = f - cond_expectation(f, Q, space)
        found = _find_family_witness([residual], sr, delta, mode, seed)
        if found is None:
            return None
        witness = found[1]
        return split_by_witness(Q, sr, witness.set), witness

    return refine


def refine_step(
    f: RandomVar,
    Q: Partition,
    sr: Semiring,
    delta: float,
    p: float,
    *,
    mode: OracleMode = OracleMode.Exact,
    seed: Optional[int] = None,
) -> Optional[Partition]:
    """
    One witness-driven refinement: if some member S has
    |integral of f - E(f|Q) over S| > delta, split Q along S. None when the
    oracle finds no such S (a certificate in exact mode).
    """
    if not delta > 0:
        raise PreconditionError(f"delta must be positive, got {delta}")
    space = sr.space
    space.check_partition(Q)
    for cell in Q:
        sr.require_member(cell, "cell of Q")

    refined = _semiring_refiner(f, sr, mode, seed)(Q, delta)
    if refined is None:
        return None
    R, witness = refined

    increment = lp_norm(cond_expectation(f, R, space) - cond_expectation(f, Q, space), space, p)
    if increment <= delta:
        raise InternalInvariantError(
            f"Refinement along a witness of value {witness.abs_value:.6g} raised the energy by only {increment:.6g}"
        )
    return R


# ------------------------------------------------------------
# THE ENERGY LOOP
# ------------------------------------------------------------
@dataclass
class LoopOutcome:
    P: Partition
    Q: Partition
    steps: List[StepRecord] = field(default_factory=list)
    jumps: int = 0
    refinements: int = 0


def run_energy_loop(
    f: RandomVar,
    space: GroundSpace,
    p: float,
    sigma: float,
    F: GrowthFunction,
    refine: Refiner,
    start: Optional[Partition] = None,
) -> LoopOutcome:
    """
    P := Q := start. If ||E(f|Q) - E(f|P)||_p > sigma the energy jumped
    and P := Q; otherwise Q is refined along a witness of size 1/F(|Q|)
    until the refiner finds none.
    """
    limits = current_settings()
    jump_cap = outer_iterations(1, sigma, p)

    P = start or Partition.trivial(space.size)
    outcome = LoopOutcome(P=P, Q=P)
    f_P = cond_expectation(f, P, space)
    f_Q = f_P

    while True:
        energy = lp_norm(f_Q - f_P, space, p)
        if energy > sigma + limits.TOLERANCE:
            outcome.jumps += 1
            outcome.steps.append(StepRecord(
                step=len(outcome.steps) + 1,
                kind="jump",
                cells_before=len(outcome.P),
                cells_after=len(outcome.Q),
                threshold=sigma,
                energy=energy,
            ))
            logger.info(f"Energy jump {outcome.jumps}: {len(outcome.P)} -> {len(outcome.Q)} cells (increment {energy:.6g})")
            if outcome.jumps >= jump_cap:
                raise InternalInvariantError(f"{outcome.jumps} energy jumps, at most {jump_cap - 1} are possible")
            outcome.P, f_P = outcome.Q, f_Q
            continue

        delta = float(1 / F(len(outcome.Q)))
        refined = refine(outcome.Q, delta)
        if refined is None:
            return outcome

        R, witness = refined
        outcome.refinements += 1
        if outcome.refinements > limits.MAX_REFINEMENT_STEPS:
            raise InternalInvariantError(f"More than {limits.MAX_REFINEMENT_STEPS} refinement steps")

        f_R = cond_expectation(f, R, space)
        increment = lp_norm(f_R - f_Q, space, p)
        outcome.steps.append(StepRecord(
            step=len(outcome.steps) + 1,
            kind="refine",
            cells_before=len(outcome.Q),
            cells_after=len(R),
            witness_value=witness.abs_value,
            threshold=delta,
            energy=increment,
        ))
        logger.debug(
            f"Refine {outcome.refinements}: {len(outcome.Q)} -> {len(R)} cells, "
            f"witness {witness.abs_value:.6g} > {delta:.6g}, energy +{increment:.6g}"
        )
        outcome.Q, f_Q = R, f_R


# ------------------------------------------------------------
# CERTIFICATES
# ------------------------------------------------------------
def certify_unf(f_unf: RandomVar, sr: Semiring, index: int, bound: float, mode: RunMode, seed: Optional[int] = None) -> UnfNormEntry:
    result = uniformity_norm(f_unf, sr, oracle_mode(sr, mode), seed=seed)
    return UnfNormEntry(
        index=index,
        bound=bound,
        measured=result.value,
        exact=result.exact,
        passed=result.value <= bound + current_settings().TOLERANCE,
    )


def split_parts(f: RandomVar, P: Partition, Q: Partition, space: GroundSpace) -> Tuple[RandomVar, RandomVar, RandomVar]:
    """(E(f|P), E(f|Q) - E(f|P), f - E(f|Q))."""
    f_P = cond_expectation(f, P, space)
    f_Q = cond_expectation(f, Q, space)
    return f_P, f_Q - f_P, f - f_Q


def _log_verdict(name: str, certificates: DecompositionCertificates) -> None:
    if not certificates.passed:
        logger.error(f"❌ {name} certificates failed: {certificates.model_dump(exclude={'steps'})}")
    elif not certificates.exact:
        logger.warning(f"⚠️ {name} certificates come from heuristic oracles (best effort)")
    else:
        logger.success(f"✅ {name} certificates verified")


# ------------------------------------------------------------
# DECOMPOSE (one function, one semiring)
# ------------------------------------------------------------
def decompose(
    f: RandomVar,
    sr: Semiring,
    p: float,
    sigma: float,
    F: GrowthFunction,
    *,
    mode: RunMode = RunMode.Exact,
    strict: bool = False,
    seed: Optional[int] = None,
    compute_bound: bool = True,
) -> Decomposition:
    """
    f = f_str + f_err + f_unf with ||f_err||_p <= sigma and
    ||f_unf||_S <= 1/F(|P|). Certificates are measured on f / scale and
    recomputed with exact oracles after the loop.
    """
    space = sr.space
    _check_sigma(sigma)
    p = effective_exponent(p)
    g, scale = normalise(f, space, p, strict)

    logger.info(f"Decomposing on {sr.kind.value} (k={sr.k}, {space.size} points), p={p}, sigma={sigma}, F={F.label}")
    outcome = run_energy_loop(g, space, p, sigma, F, _semiring_refiner(g, sr, oracle_mode(sr, mode), seed))
    P, Q = outcome.P, outcome.Q

    f_str, f_err, f_unf = split_parts(g, P, Q, space)
    err_lp = lp_norm(f_err, space, p)
    entry = certify_unf(f_unf, sr, len(P), float(1 / F(len(P))), mode, seed)

    reg_prime = within = None
    if compute_bound:
        bound = reg_prime_bound(sr.k, sigma, p, F)
        if not bound.overflowed:
            reg_prime = bound.reg_prime
            within = len(P) <= reg_prime

    certificates = DecompositionCertificates(
        err_lp=err_lp,
        unf_norms=[entry],
        outer_iterations=outcome.jumps,
        refinement_steps=outcome.refinements,
        scale=scale,
        exact=entry.exact,
        passed=err_lp <= sigma + current_settings().TOLERANCE and entry.passed and within is not False,
        steps=outcome.steps,
        reg_prime=reg_prime,
        within_reg_prime=within,
    )
    logger.info(f"Decomposition finished: |P|={len(P)}, |Q|={len(Q)}, {outcome.refinements} refinements, {outcome.jumps} jumps")
    _log_verdict("Decomposition", certificates)

    return Decomposition(
        P=P,
        Q=Q,
        f_str=f_str * scale,
        f_err=f_err * scale,
        f_unf=f_unf * scale,
        p=p,
        sigma=sigma,
        growth=F,
        certificates=certificates,
    )


# ------------------------------------------------------------
# DECOMPOSE_MULTI (a family of functions, an increasing semiring sequence)
# ------------------------------------------------------------
class _StageIndex:
    """
    Stage bookkeeping: n_0 = 0, n_{i+1} = n_i + ceil(sigma^2 ell H(n_i)^2 / (p-1))
    with H(n) = F^{(n+2)}(0), and Sigma_i = S_{m_i} with m_i = F^{(i)}(0).
    Indices past the end of the semiring list map to its last entry.
    """

    def __init__(self, F: GrowthFunction, ell: int, sigma: float, p: float, count: int):
        self.F = F
        self.ell = ell
        self.sigma = to_fraction(sigma, "sigma")
        self.p = to_fraction(p, "p")
        self.last = count - 1
        self._starts: List[Optional[int]] = [0]

    def start(self, j: int) -> Optional[int]:
        """n_j, or None once the numbers overflow."""
        while len(self._starts) <= j:
            previous = self._starts[-1]
            if previous is None:
                self._starts.append(None)
                continue
            try:
                self._starts.append(previous + stage_increment(previous, self.ell, self.sigma, self.p, self.F))
            except BoundOverflow:
                self._starts.append(None)
        return self._starts[j]

    def semiring_index(self, i: int) -> int:
        try:
            return min(self.F.iterate(i), self.last)
        except BoundOverflow:
            return self.last

    def tolerance(self, j: int) -> float:
        """1/H(n_j), and 0 when H(n_j) is too large to evaluate."""
        n = self.start(j)
        if n is None:
            return 0.0
        try:
            return float(Fraction(1, self.F.iterate(n + 2)))
        except BoundOverflow:
            return 0.0


def decompose_multi(
    C: Sequence[RandomVar],
    semirings: Sequence[Semiring],
    p: float,
    sigma: float,
    F: GrowthFunction,
    *,
    mode: RunMode = RunMode.Exact,
    strict: bool = False,
    seed: Optional[int] = None,
) -> MultiDecomposition:
    """
    One pair (P, Q) for a whole family: P is built from members of S_N
    with |P| <= (k+1)^N, and for every f in C, ||f_err||_p <= sigma and
    ||f_unf||_{S_i} <= 1/F(i) for every i <= F(N).
    """
    if not C:
        raise PreconditionError("The function family must not be empty")
    if not semirings:
        raise PreconditionError("The semiring sequence must not be empty")
    _check_sigma(sigma)

    space = semirings[0].space
    for sr in semirings[1:]:
        if not sr.space.same_as(space):
            raise PreconditionError("Every semiring of the sequence must live on the same space")
    settings = current_settings()
    seed = settings.DEFAULT_SEED if seed is None else seed
    if not is_increasing(semirings, np.random.default_rng(seed)):
        raise PreconditionError("The semiring sequence is not increasing")

    p = effective_exponent(p)
    normalised = [normalise(f, space, p, strict) for f in C]
    family = [g for g, _ in normalised]
    ell = len(family)
    k = max(sr.k for sr in semirings)
    stages = _StageIndex(F, ell, sigma, p, len(semirings))
    jump_cap = outer_iterations(ell, sigma, p)

    logger.info(f"Decomposing {ell} functions over {len(semirings)} semirings (k={k}), p={p}, sigma={sigma}, F={F.label}")

    P = Q = Partition.trivial(space.size)
    f_P = [cond_expectation(g, P, space) for g in family]
    f_Q = list(f_P)
    j, J = 0, 0
    refinements = 0
    steps: List[StepRecord] = []

    while True:
        energies = [lp_norm(q - base, space, p) for q, base in zip(f_Q, f_P)]
        worst = int(np.argmax(energies))
        if energies[worst] > sigma + settings.TOLERANCE:
            steps.append(StepRecord(
                step=len(steps) + 1, kind="jump", cells_before=len(P), cells_after=len(Q),
                threshold=sigma, energy=energies[worst], stage=j, function_index=worst,
            ))
            P, f_P = Q, list(f_Q)
            j += 1
            logger.info(f"Energy jump to stage {j} on function {worst}: |P|={len(P)}")
            if j >= jump_cap:
                raise InternalInvariantError(f"{j} energy jumps, at most {jump_cap - 1} are possible")
            start = stages.start(j)
            if start is not None:
                J = start
            continue

        index = stages.semiring_index(J + 1)
        sr = semirings[index]
        delta = stages.tolerance(j)
        residuals = [g - q for g, q in zip(family, f_Q)]
        found = _find_family_witness(residuals, sr, delta, oracle_mode(sr, mode), seed)
        if found is None:
            break

        function_index, witness = found
        R = split_by_witness(Q, sr, witness.set)
        refinements += 1
        J += 1
        if refinements > settings.MAX_REFINEMENT_STEPS:
            raise InternalInvariantError(f"More than {settings.MAX_REFINEMENT_STEPS} refinement steps")
        next_start = stages.start(j + 1)
        if next_start is not None and J > next_start:
            raise InternalInvariantError(f"Stage {j} ran past level {next_start}")
        if len(R) > (k + 1) ** J:
            raise InternalInvariantError(f"|Q| = {len(R)} exceeds (k+1)^{J}")

        steps.append(StepRecord(
            step=len(steps) + 1, kind="refine", cells_before=len(Q), cells_after=len(R),
            witness_value=witness.abs_value, threshold=delta, stage=j, function_index=function_index,
            energy=lp_norm(cond_expectation(family[function_index], R, space) - f_Q[function_index], space, p),
        ))
        logger.debug(f"Stage {j}, level {J}: {len(Q)} -> {len(R)} cells on S_{index}, witness {witness.abs_value:.6g}")
        Q = R
        f_Q = [cond_expectation(g, Q, space) for g in family]

    # ------------------------------------------------------------
    # CERTIFICATES
    # ------------------------------------------------------------
    n_j = stages.start(j)
    try:
        N = F.iterate(n_j) if n_j is not None else None
    except BoundOverflow:
        N = None
    top = math.floor(F(N)) if N is not None else None
    checked = list(range(0, stages.last + 1 if top is None else min(top, stages.last) + 1))

    P_index = stages.last if N is None else min(N, stages.last)
    P_members = all(semirings[P_index].contains(cell) for cell in P)
    size_within = n_j is not None and len(P) <= (k + 1) ** n_j

    reg = reg_bound(k, ell, sigma, p, F).reg
    within_reg = reg is None or N is None or N <= reg

    parts: List[Decomposition] = []
    for (g, scale) in normalised:
        f_str, f_err, f_unf = split_parts(g, P, Q, space)
        err_lp = lp_norm(f_err, space, p)
        measured: Dict[int, UnfNormEntry] = {}
        entries = []
        for i in checked:
            key = id(semirings[i])
            entry = measured.get(key)
            if entry is None:
                entry = certify_unf(f_unf, semirings[i], i, 0.0, mode, seed)
                measured[key] = entry
            bound = float(1 / F(i))
            entries.append(entry.model_copy(update={
                "index": i,
                "bound": bound,
                "passed": entry.measured <= bound + settings.TOLERANCE,
            }))
        if top is not None and top > stages.last:
            entry = certify_unf(f_unf, semirings[-1], top, float(1 / F(top)), mode, seed)
            entries.append(entry)

        certificates = DecompositionCertificates(
            err_lp=err_lp,
            unf_norms=entries,
            outer_iterations=j,
            refinement_steps=refinements,
            scale=scale,
            exact=all(entry.exact for entry in entries),
            passed=err_lp <= sigma + settings.TOLERANCE and all(entry.passed for entry in entries),
            steps=steps,
        )
        parts.append(Decomposition(
            P=P, Q=Q,
            f_str=f_str * scale, f_err=f_err * scale, f_unf=f_unf * scale,
            p=p, sigma=sigma, growth=F, certificates=certificates,
        ))

    passed = all(part.certificates.passed for part in parts) and P_members and size_within and within_reg
    result = MultiDecomposition(
        P=P,
        Q=Q,
        parts=parts,
        N=N,
        stage=j,
        J=J,
        semiring_index=stages.semiring_index(J),
        size_within_bound=size_within,
        reg=reg,
        passed=passed,
    )
    logger.info(f"Family decomposition finished: |P|={len(P)}, |Q|={len(Q)}, stage {j}, level {J}, N={N}")
    if passed:
        logger.success("✅ Family decomposition certificates verified")
    else:
        logger.error(f"❌ Family decomposition certificates failed (members={P_members}, size={size_within}, N<=Reg={within_reg})")
    return result


# ------------------------------------------------------------
# GREEDY SIMPLE-FUNCTION APPROXIMATION
# ------------------------------------------------------------
def greedy_simple_approximation(f: RandomVar, space: GroundSpace, eps: float, p: float) -> GreedyApproximation:
    """
    Refines along any set A with |integral of f - f_i over A| > eps/2
    until ||f - f_i||_1 <= eps, where f_i = E(f|P_i). The iteration count is
    at most floor(4 ||f||_p^2 / (eps^2 (p-1))) + 1.
    """
    if not 0 < eps <= 1:
        raise PreconditionError(f"eps must lie in (0, 1], got {eps}")
    if not 1 < p <= 2:
        raise PreconditionError(f"p must lie in (1, 2], got {p}")
    space.check_var(f)

    algebra = power_set(space)
    bound = math.floor(4 * lp_norm(f, space, p) ** 2 / (eps ** 2 * (p - 1))) + 1
    partition = Partition.trivial(space.size)
    approximation = cond_expectation(f, partition, space)
    iterations = 0

    while lp_norm(f - approximation, space, 1.0) > eps:
        # The better of the positive and negative supports carries at least half the L_1 mass
        witness = uniformity_norm(f - approximation, algebra).witness
        if witness.abs_value <= eps / 2:
            raise InternalInvariantError(f"Best set carries {witness.abs_value:.6g}, expected more than eps/2")
        partition = common_refinement(partition, witness.set)
        approximation = cond_expectation(f, partition, space)
        iterations += 1
        logger.debug(f"Greedy step {iterations}: {len(partition)} cells")

    passed = iterations <= bound
    if not passed:
        logger.error(f"❌ Greedy approximation took {iterations} steps, bound is {bound}")
    return GreedyApproximation(
        partition=partition,
        approximation=approximation,
        l1_error=lp_norm(f - approximation, space, 1.0),
        iterations=iterations,
        iteration_bound=bound,
        passed=passed,
    )
