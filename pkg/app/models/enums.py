# app/models/enums.py

from enum import Enum

class SemiringKind(str, Enum):
    Algebra = "algebra"
    Intervals = "intervals"
    Product = "product"
    Rectangles = "rectangles"
    SymmetricRectangles = "symmetric_rectangles"
    Cylinder = "cylinder"
    Hypercube = "hypercube"
    Intersection = "intersection"

class OracleMode(str, Enum):
    Exact = "exact"
    Heuristic = "heuristic"

class RunMode(str, Enum):
    Exact = "exact"
    BestEffort = "best-effort"

class GrowthKind(str, Enum):
    Successor = "successor"
    Affine = "affine"
    Polynomial = "polynomial"
    Table = "table"
    Lifted = "lifted"
    Schedule = "schedule"

class Operation(str, Enum):
    Decompose = "decompose"
    Multi = "multi"
    Uniform = "uniform"
    Hypercube = "hypercube"
    GraphonStrong = "graphon-strong"
    GraphonWeak = "graphon-weak"
    Norm = "norm"
    Bounds = "bounds"
    Verify = "verify"
