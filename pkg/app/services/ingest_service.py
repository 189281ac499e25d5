# app/services/ingest_service.py

import csv
import json
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import ValidationError

from app.core.exceptions import IngestError
from app.models.measure import GroundSpace, RandomVar, Subset
from app.models.structures import HypercubeSpec
from app.schemas.config import FamilyInput, HypercubeInput, MatrixInput

# Weights off by less than this are renormalised instead of rejected
WEIGHT_SLACK = 1e-6


# ------------------------------------------------------------
# FILE READING
# ------------------------------------------------------------
def _read_text(path: Path) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except FileNotFoundError:
        raise IngestError(f"Input file not found: {path}", {"path": str(path)})
    except OSError as e:
        raise IngestError(f"Cannot read {path}: {e}", {"path": str(path)})


def _read_json(path: Path) -> Any:
    text = _read_text(path)
    if not text.strip():
        raise IngestError(f"Input file {path} is empty", {"path": str(path)})
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise IngestError(f"Invalid JSON in {path}: {e.msg} (line {e.lineno})", {"path": str(path)})


def _validation_message(e: ValidationError) -> str:
    first = e.errors()[0]
    where = ".".join(str(part) for part in first["loc"])
    return f"{where}: {first['msg']}" if where else first["msg"]


# ------------------------------------------------------------
# MATRICES
# ------------------------------------------------------------
def _read_csv_rows(path: Path) -> List[List[float]]:
    text = _read_text(path)
    rows = [row for row in csv.reader(text.splitlines()) if any(cell.strip() for cell in row)]
    if not rows:
        raise IngestError(f"Input file {path} is empty", {"path": str(path)})

    width = len(rows[0])
    parsed = []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise IngestError(
                f"Ragged CSV: row {i} has {len(row)} entries, row 0 has {width}",
                {"row": i, "entries": len(row), "expected": width},
            )
        try:
            parsed.append([float(cell) for cell in row])
        except ValueError:
            raise IngestError(f"Non-numeric entry in row {i} of {path}", {"row": i})
    return parsed


def _check_square(matrix: Sequence[Sequence[float]]) -> np.ndarray:
    n = len(matrix)
    for i, row in enumerate(matrix):
        if len(row) != n:
            raise IngestError(
                f"Matrix must be square: row {i} has {len(row)} entries for {n} rows",
                {"row": i, "entries": len(row), "expected": n},
            )
    array = np.asarray(matrix, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise IngestError("Matrix entries must be finite numbers")
    return array


def _base_space(n: int, weights: Optional[Sequence[float]]) -> GroundSpace:
    if weights is None:
        return GroundSpace.uniform(n)
    if len(weights) != n:
        raise IngestError(f"{len(weights)} weights for {n} rows", {"weights": len(weights), "rows": n})
    w = np.asarray(weights, dtype=np.float64)
    if not np.all(np.isfinite(w)) or bool((w < 0).any()):
        raise IngestError("Weights must be finite and nonnegative")
    total = float(w.sum())
    if abs(total - 1.0) > WEIGHT_SLACK:
        raise IngestError(f"Weights sum to {total!r}, expected 1", {"sum": total})
    if total != 1.0:
        logger.warning(f"⚠️ Renormalising weights that sum to {total!r}")
        w = w / total
    return GroundSpace(tuple(range(n)), w)


def _first_asymmetric_pair(matrix: np.ndarray) -> Optional[Tuple[int, int]]:
    pairs = np.argwhere(matrix != matrix.T)
    if not pairs.size:
        return None
    x, y = (int(i) for i in pairs[0])
    return x, y


def _as_variable(matrix: np.ndarray, require_symmetric: bool) -> RandomVar:
    if require_symmetric:
        pair = _first_asymmetric_pair(matrix)
        if pair is not None:
            x, y = pair
            raise IngestError(
                f"Graphon input is not symmetric: entry ({x},{y}) = {matrix[x, y]} but ({y},{x}) = {matrix[y, x]}",
                {"pair": [x, y]},
            )
    return RandomVar(matrix.ravel())


def ingest_matrix(path: Path, fmt: str = "csv", require_symmetric: bool = False) -> Tuple[GroundSpace, RandomVar]:
    """
    Reads an n x n matrix as a random variable on base x base (row-major).
    CSV rows with n+1 entries carry the row weight last; JSON is either a
    bare list of rows or {"matrix": [...], "weights": [...]}.
    """
    path = Path(path)
    weights = None
    if fmt == "csv":
        rows = _read_csv_rows(path)
        if all(len(row) == len(rows) + 1 for row in rows):
            weights = [row[-1] for row in rows]
            rows = [row[:-1] for row in rows]
    elif fmt == "json":
        raw = _read_json(path)
        if isinstance(raw, list):
            raw = {"matrix": raw}
        try:
            parsed = MatrixInput.model_validate(raw)
        except ValidationError as e:
            raise IngestError(f"Malformed matrix input in {path}: {_validation_message(e)}", {"path": str(path)})
        rows, weights = parsed.matrix, parsed.weights
    else:
        raise IngestError(f"Unknown input format '{fmt}'", {"format": fmt})

    matrix = _check_square(rows)
    base = _base_space(len(matrix), weights)

    logger.debug(f"Read a {len(matrix)}x{len(matrix)} matrix from {path}")
    return base, _as_variable(matrix, require_symmetric)


def ingest_family(path: Path) -> Tuple[GroundSpace, List[RandomVar]]:
    """{"matrices": [[...], ...], "weights": [...]} with every matrix on the same base."""
    path = Path(path)
    try:
        parsed = FamilyInput.model_validate(_read_json(path))
    except ValidationError as e:
        raise IngestError(f"Malformed family input in {path}: {_validation_message(e)}", {"path": str(path)})

    matrices = [_check_square(matrix) for matrix in parsed.matrices]
    sizes = {len(matrix) for matrix in matrices}
    if len(sizes) != 1:
        raise IngestError(f"Family matrices have different sizes {sorted(sizes)}", {"sizes": sorted(sizes)})
    base = _base_space(len(matrices[0]), parsed.weights)
    logger.debug(f"Read {len(matrices)} matrices on a {base.size}-point base from {path}")
    return base, [_as_variable(matrix, False) for matrix in matrices]


# ------------------------------------------------------------
# HYPERCUBES
# ------------------------------------------------------------
def ingest_hypercube(path: Path) -> Tuple[HypercubeSpec, Subset]:
    """
    {"alphabet": [...], "n": int, "subset": [words], "pairs": optional}.
    D is returned on A^n in lexicographic order; duplicate words are dropped.
    """
    path = Path(path)
    try:
        parsed = HypercubeInput.model_validate(_read_json(path))
        spec = HypercubeSpec(alphabet=parsed.alphabet, n=parsed.n, pairs=parsed.pairs)
    except ValidationError as e:
        raise IngestError(f"Malformed hypercube input in {path}: {_validation_message(e)}", {"path": str(path)})

    symbols = set(spec.alphabet)
    seen = set()
    for word in parsed.subset:
        if len(word) != spec.n:
            raise IngestError(f"Word '{word}' has length {len(word)}, expected {spec.n}", {"word": word})
        outside = [symbol for symbol in word if symbol not in symbols]
        if outside:
            raise IngestError(f"Word '{word}' uses symbol '{outside[0]}' outside the alphabet", {"word": word})
        seen.add(word)

    duplicates = len(parsed.subset) - len(seen)
    if duplicates:
        logger.warning(f"⚠️ Dropped {duplicates} duplicate word(s) from the subset")

    words = spec.words()
    index = {word: i for i, word in enumerate(words)}
    D = Subset.from_indices(sorted(index[word] for word in seen), len(words))
    return spec, D
