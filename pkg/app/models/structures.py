# app/models/structures.py

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.exceptions import DimensionMismatchError, PreconditionError
from app.models.measure import GroundSpace, RandomVar


# ------------------------------------------------------------
# HYPERCUBE A^n
# ------------------------------------------------------------
class HypercubeSpec(BaseModel):
    """
    An alphabet of single-character symbols, a word length and the
    unordered symbol pairs whose insensitive sets are intersected
    (all pairs when omitted).
    """
    model_config = ConfigDict(frozen=True)

    alphabet: List[str] = Field(..., min_length=2)
    n: int = Field(..., ge=1)
    pairs: Optional[List[Tuple[str, str]]] = None

    @field_validator("alphabet")
    @classmethod
    def distinct_symbols(cls, v: List[str]) -> List[str]:
        if any(len(symbol) != 1 for symbol in v):
            raise ValueError("Alphabet symbols must be single characters")
        if len(set(v)) != len(v):
            raise ValueError("Alphabet symbols must be distinct")
        return v

    @model_validator(mode='after')
    def check_pairs(self):
        if self.pairs is None:
            object.__setattr__(self, "pairs", [tuple(pair) for pair in itertools.combinations(self.alphabet, 2)])
        if not self.pairs:
            raise ValueError("Pair set must not be empty")
        normalised = []
        for a, b in self.pairs:
            if a not in self.alphabet or b not in self.alphabet:
                raise ValueError(f"Pair ({a}, {b}) uses symbols outside the alphabet")
            if a == b:
                raise ValueError(f"Pair ({a}, {b}) must name two different symbols")
            pair = tuple(sorted((a, b), key=self.alphabet.index))
            if pair not in normalised:
                normalised.append(pair)
        object.__setattr__(self, "pairs", normalised)
        return self

    @property
    def all_pairs(self) -> bool:
        return len(self.pairs) == len(self.alphabet) * (len(self.alphabet) - 1) // 2

    def words(self) -> List[str]:
        """A^n in lexicographic order (alphabet order per position)."""
        return ["".join(word) for word in itertools.product(self.alphabet, repeat=self.n)]

    def space(self) -> GroundSpace:
        return GroundSpace.uniform(self.words())


# ------------------------------------------------------------
# GRAPHONS
# ------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Graphon:
    """A symmetric random variable W on base x base."""
    base: GroundSpace
    W: RandomVar
    space: GroundSpace = field(init=False, repr=False)

    def __post_init__(self):
        n = self.base.size
        if self.W.size != n * n:
            raise DimensionMismatchError(
                f"Graphon needs {n * n} values on a {n}-point base, got {self.W.size}",
                {"values": self.W.size, "base": n},
            )
        matrix = self.W.values.reshape(n, n)
        asymmetric = np.argwhere(matrix != matrix.T)
        if asymmetric.size:
            x, y = (int(i) for i in asymmetric[0])
            raise PreconditionError(
                f"Graphon is not symmetric: W({x},{y}) = {matrix[x, y]} but W({y},{x}) = {matrix[y, x]}",
                {"pair": [x, y]},
            )
        object.__setattr__(self, "space", GroundSpace.product(self.base, self.base))

    @classmethod
    def from_matrix(cls, matrix, base: Optional[GroundSpace] = None) -> "Graphon":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatchError(f"Graphon matrix must be square, got shape {matrix.shape}")
        base = base or GroundSpace.uniform(matrix.shape[0])
        return cls(base, RandomVar(matrix.ravel()))

    @property
    def n(self) -> int:
        return self.base.size

    @property
    def matrix(self) -> np.ndarray:
        return self.W.values.reshape(self.n, self.n)
