# app/schemas/results.py

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.models.growth import GrowthFunction
from app.models.measure import Partition, RandomVar, Subset
from app.models.structures import Graphon


class ResultModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# ------------------------------------------------------------
# UNIFORMITY NORMS
# ------------------------------------------------------------
class Witness(ResultModel):
    set: Subset
    value: float
    abs_value: float = Field(..., ge=0)


class NormResult(ResultModel):
    value: float = Field(..., ge=0)
    witness: Witness
    exact: bool


class ComparisonClause(ResultModel):
    passed: bool
    lhs: float
    rhs: float
    upper: Optional[float] = None


class ComparisonReport(ResultModel):
    """
    (a) ||f||_S <= ||f||_1; (b) ||E(f|B)||_S <= ||f||_S;
    (c) ||f||_S <= ||E(f|S)||_1 <= 2||f||_S, only for algebra semirings.
    """
    a: ComparisonClause
    b: ComparisonClause
    c: Optional[ComparisonClause] = None

    @property
    def passed(self) -> bool:
        return self.a.passed and self.b.passed and (self.c is None or self.c.passed)


# ------------------------------------------------------------
# DECOMPOSITIONS
# ------------------------------------------------------------
class StepRecord(ResultModel):
    step: int
    kind: str  # "refine" or "jump"
    cells_before: int
    cells_after: int
    witness_value: Optional[float] = None
    threshold: Optional[float] = None
    energy: float
    stage: Optional[int] = None
    function_index: Optional[int] = None


class UnfNormEntry(ResultModel):
    index: int
    bound: float
    measured: float
    exact: bool
    passed: bool


class DecompositionCertificates(ResultModel):
    err_lp: float
    unf_norms: List[UnfNormEntry]
    outer_iterations: int
    refinement_steps: int
    scale: float = 1.0
    exact: bool = True
    passed: bool
    steps: List[StepRecord] = []
    reg_prime: Optional[int] = None
    within_reg_prime: Optional[bool] = None


class Decomposition(ResultModel):
    P: Partition
    Q: Partition
    f_str: RandomVar
    f_err: RandomVar
    f_unf: RandomVar
    p: float
    sigma: float
    growth: GrowthFunction
    certificates: DecompositionCertificates


class MultiDecomposition(ResultModel):
    """One (P, Q) shared by every function of the family."""
    P: Partition
    Q: Partition
    parts: List[Decomposition]
    N: Optional[int]
    stage: int
    J: int
    semiring_index: int
    size_within_bound: bool
    reg: Optional[int] = None
    passed: bool


class GreedyApproximation(ResultModel):
    partition: Partition
    approximation: RandomVar
    l1_error: float
    iterations: int
    iteration_bound: int
    passed: bool


# ------------------------------------------------------------
# BOUNDS
# ------------------------------------------------------------
class BoundReport(ResultModel):
    L: Optional[int] = None
    R: Optional[int] = None
    h_table: List[int] = []
    reg: Optional[int] = None
    reg_prime: Optional[int] = None
    overflowed: bool = False
    digits_estimate: Optional[int] = None
    overflow_stage: Optional[str] = None


# ------------------------------------------------------------
# APPLICATIONS
# ------------------------------------------------------------
class CellVerdict(ResultModel):
    cell: Subset
    probability: float
    uniform: bool
    worst_value: float
    witness: Optional[Subset] = None


class ExceptionalCells(ResultModel):
    """Cells with E(|f_err| | S) >= eta/4, and cells with P(S) <= 4 ||f_unf||_S / eta."""
    large_error: List[int]
    small_cells: List[int]
    large_error_mass: float
    small_cells_mass: float
    hypotheses_hold: bool


class UniformityReport(ResultModel):
    partition: Partition
    cells: List[CellVerdict]
    eta: float
    total_uniform_mass: float
    nonuniform_mass: float
    exceptional: Optional[ExceptionalCells] = None
    decomposition: Optional[Decomposition] = None
    size_bound: Optional[int] = None
    passed: bool

    @property
    def uniform_cells(self) -> List[Subset]:
        return [verdict.cell for verdict in self.cells if verdict.uniform]


class DensityCheck(ResultModel):
    cell: Subset
    density: float
    checked: int
    worst_gap: float
    passed: bool


class HypercubeReport(ResultModel):
    uniformity: UniformityReport
    eps: float
    densities: List[DensityCheck]
    uniform_family_mass: float
    passed: bool


class GraphonStrongResult(ResultModel):
    R: Partition
    Z: Partition
    U: Graphon
    err_lp: float
    cut_gap: float
    cut_gap_bound: float
    unf_sigma_norm: float
    unf_cut_norm: float
    unf_bound: float
    size_bound: Optional[int] = None
    steps: List[StepRecord] = []
    scale: float = 1.0
    passed: bool


class WeakStep(ResultModel):
    step: int
    witness_value: float
    cells_before: int
    cells_after: int
    growth_factor: float


class GraphonWeakResult(ResultModel):
    R: Partition
    steps: int
    step_bound: int
    final_cut_norm: float
    log: List[WeakStep] = []
    scale: float = 1.0
    passed: bool
