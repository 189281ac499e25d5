# app/schemas/config.py

from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.constants import DEFAULT_GRAPHON_SCHEDULE, DEFAULT_GROWTH_SPEC
from app.models.enums import Operation, RunMode
from app.models.growth import parse_growth, to_fraction

# Settings fields a run may override through --caps
CAP_FIELDS = (
    "ENUMERATION_CAP",
    "CUT_NORM_CAP",
    "HYPERCUBE_MAX_ALPHABET",
    "HYPERCUBE_MAX_LENGTH",
    "BATCH_SIZE",
    "HEURISTIC_RESTARTS",
    "MAX_REFINEMENT_STEPS",
    "BOUND_DIGIT_LIMIT",
    "BOUND_ITERATION_LIMIT",
)

# Operations that read a matrix (or a family of matrices)
MATRIX_OPERATIONS = {
    Operation.Decompose,
    Operation.Multi,
    Operation.Uniform,
    Operation.GraphonStrong,
    Operation.GraphonWeak,
    Operation.Norm,
}


# ----- Input files -----
class MatrixInput(BaseModel):
    matrix: List[List[float]] = Field(..., min_length=1)
    weights: Optional[List[float]] = None


class FamilyInput(BaseModel):
    matrices: List[List[List[float]]] = Field(..., min_length=1)
    weights: Optional[List[float]] = None


class HypercubeInput(BaseModel):
    alphabet: List[str] = Field(..., min_length=2)
    n: int = Field(..., ge=1)
    subset: List[str]
    pairs: Optional[List[Tuple[str, str]]] = None


# ----- Run configuration -----
class RunConfig(BaseModel):
    """One CLI invocation, validated before anything is read from disk."""
    model_config = ConfigDict(frozen=True)

    operation: Operation
    input: Optional[Path] = None
    format: str = "csv"
    semiring: str = "rectangles"

    p: float = 2.0
    sigma: Optional[float] = None
    eta: Optional[float] = None
    eps: Optional[float] = None
    growth: Optional[str] = None

    mode: RunMode = RunMode.Exact
    strict: bool = False
    accept_cost: bool = False
    tol: float = Field(1e-9, gt=0)
    seed: int = 0
    caps: Dict[str, int] = {}

    output: Optional[Path] = None
    stable_output: bool = False

    # bounds
    k: int = 1
    ell: int = 1
    prime: bool = False
    bound_sigma: Optional[str] = None
    bound_p: Optional[str] = None

    # verify
    report: Optional[Path] = None

    @field_validator("format")
    @classmethod
    def known_format(cls, v: str) -> str:
        v = v.lower()
        if v not in {"csv", "json"}:
            raise ValueError(f"Unknown input format '{v}' (csv or json)")
        return v

    @field_validator("caps")
    @classmethod
    def known_caps(cls, v: Dict[str, int]) -> Dict[str, int]:
        caps = {}
        for name, value in v.items():
            key = name.upper()
            if key not in CAP_FIELDS:
                raise ValueError(f"Unknown cap '{name}' (one of {', '.join(CAP_FIELDS)})")
            if value < 1:
                raise ValueError(f"Cap {key} must be at least 1, got {value}")
            caps[key] = value
        return caps

    @model_validator(mode='after')
    def check_operation(self):
        op = self.operation
        if op not in {Operation.Bounds, Operation.Verify} and self.input is None:
            raise ValueError(f"{op.value} needs --input")
        if op is Operation.Verify and self.report is None:
            raise ValueError("verify needs --report")
        if op in MATRIX_OPERATIONS | {Operation.Hypercube} and not 1 < self.p:
            raise ValueError(f"p must exceed 1, got {self.p}")

        needs = {
            Operation.Decompose: "sigma",
            Operation.Multi: "sigma",
            Operation.Uniform: "eta",
            Operation.Hypercube: "eps",
            Operation.GraphonStrong: "eps",
            Operation.GraphonWeak: "eps",
        }
        name = needs.get(op)
        if name is not None:
            value = getattr(self, name)
            if value is None:
                raise ValueError(f"{op.value} needs --{name}")
            if not 0 < value <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")

        if op is Operation.Bounds:
            if self.k < 1 or self.ell < 1:
                raise ValueError("k and ell must be positive integers")
            if self.bound_sigma is None:
                raise ValueError("bounds needs --sigma")
            to_fraction(self.bound_sigma, "sigma")
            to_fraction(self.bound_p or "2", "p")

        # Parse now so a malformed spec fails before any work is done
        parse_growth(self.growth_spec)
        return self

    @property
    def growth_spec(self) -> str:
        if self.growth:
            return self.growth
        if self.operation is Operation.GraphonStrong:
            return DEFAULT_GRAPHON_SCHEDULE
        return DEFAULT_GROWTH_SPEC

    def settings_overrides(self) -> Dict[str, object]:
        return {"TOLERANCE": self.tol, "DEFAULT_SEED": self.seed, **self.caps}
