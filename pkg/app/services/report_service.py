# app/services/report_service.py

import json
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from loguru import logger
from pydantic import ValidationError

from app.core.config import current_settings
from app.core.exceptions import ConfigError, IngestError, RegularityError
from app.models.enums import Operation
from app.models.growth import parse_growth, to_fraction
from app.models.measure import Partition, RandomVar
from app.models.semiring import Semiring
from app.models.structures import Graphon
from app.schemas.config import RunConfig
from app.schemas.report import Report
from app.schemas.results import (
    BoundReport,
    CellVerdict,
    Decomposition,
    DensityCheck,
    GraphonStrongResult,
    GraphonWeakResult,
    HypercubeReport,
    MultiDecomposition,
    NormResult,
    StepRecord,
    UniformityReport,
)
from app.services.application_service import check_relative_densities, is_uniform_cell
from app.services.bounds_service import reg_bound, reg_prime_bound
from app.services.decompose_service import effective_exponent, oracle_mode, split_parts
from app.services.graphon_service import step_graphon
from app.services.ingest_service import ingest_family, ingest_hypercube, ingest_matrix
from app.services.measure_service import lp_norm
from app.services.semiring_service import from_name, hypercube_insensitive
from app.services.uniformity_service import cut_norm_exact, uniformity_norm


# ------------------------------------------------------------
# JSON-SAFE VALUES
# ------------------------------------------------------------
def partition_out(P: Partition) -> List[List[int]]:
    return P.to_index_lists()


def values_out(f: RandomVar) -> List[float]:
    return [float(v) for v in f.values]


@contextmanager
def _unlimited_int_digits() -> Iterator[None]:
    if not hasattr(sys, "get_int_max_str_digits"):
        yield
        return
    limit = sys.get_int_max_str_digits()
    sys.set_int_max_str_digits(0)
    try:
        yield
    finally:
        sys.set_int_max_str_digits(limit)


def big(value: Optional[int]) -> Optional[str]:
    """Big integers travel as decimal strings (Reg' can run to 10^5 digits)."""
    if value is None:
        return None
    with _unlimited_int_digits():
        return str(value)


def steps_out(steps: Sequence[StepRecord]) -> List[Dict[str, Any]]:
    return [step.model_dump(mode="json") for step in steps]


def verdict_out(verdict: CellVerdict) -> Dict[str, Any]:
    return {
        "cell": verdict.cell.indices(),
        "probability": verdict.probability,
        "uniform": verdict.uniform,
        "worst_value": verdict.worst_value,
        "witness": None if verdict.witness is None else verdict.witness.indices(),
    }


def density_out(check: DensityCheck) -> Dict[str, Any]:
    return {
        "cell": check.cell.indices(),
        "density": check.density,
        "checked": check.checked,
        "worst_gap": check.worst_gap,
        "passed": check.passed,
    }


def bounds_out(report: BoundReport) -> Dict[str, Any]:
    return {
        "L": report.L,
        "R": big(report.R),
        "h_table": [big(h) for h in report.h_table],
        "reg": big(report.reg),
        "reg_prime": big(report.reg_prime),
        "overflowed": report.overflowed,
        "digits_estimate": big(report.digits_estimate),
        "overflow_stage": report.overflow_stage,
    }


# ------------------------------------------------------------
# RESULTS -> (outputs, certificates)
# ------------------------------------------------------------
Section = Tuple[Dict[str, Any], Dict[str, Any]]


def decomposition_sections(d: Decomposition) -> Section:
    c = d.certificates
    outputs = {
        "P": partition_out(d.P),
        "Q": partition_out(d.Q),
        "f_str": values_out(d.f_str),
        "f_err": values_out(d.f_err),
        "f_unf": values_out(d.f_unf),
        "steps": steps_out(c.steps),
    }
    certificates = {
        "err_lp": c.err_lp,
        "sigma": d.sigma,
        "unf_norms": [entry.model_dump(mode="json") for entry in c.unf_norms],
        "outer_iterations": c.outer_iterations,
        "refinement_steps": c.refinement_steps,
        "scale": c.scale,
        "exact": c.exact,
        "reg_prime": big(c.reg_prime),
        "within_reg_prime": c.within_reg_prime,
        "passed": c.passed,
    }
    return outputs, certificates


def multi_sections(m: MultiDecomposition) -> Section:
    outputs = {
        "P": partition_out(m.P),
        "Q": partition_out(m.Q),
        "parts": [],
        "steps": steps_out(m.parts[0].certificates.steps),
    }
    certificates = {
        "N": big(m.N),
        "stage": m.stage,
        "J": m.J,
        "semiring_index": m.semiring_index,
        "size_within_bound": m.size_within_bound,
        "reg": big(m.reg),
        "functions": [],
        "passed": m.passed,
    }
    for part in m.parts:
        part_outputs, part_certificates = decomposition_sections(part)
        outputs["parts"].append({name: part_outputs[name] for name in ("f_str", "f_err", "f_unf")})
        certificates["functions"].append(part_certificates)
    return outputs, certificates


def uniformity_sections(report: UniformityReport) -> Section:
    exceptional = report.exceptional
    outputs = {
        "P": partition_out(report.partition),
        "cells": [verdict_out(verdict) for verdict in report.cells],
    }
    certificates = {
        "eta": report.eta,
        "nonuniform_mass": report.nonuniform_mass,
        "total_uniform_mass": report.total_uniform_mass,
        "size_bound": big(report.size_bound),
        "exceptional": None if exceptional is None else exceptional.model_dump(mode="json"),
        "scale": report.decomposition.certificates.scale if report.decomposition else 1.0,
        "passed": report.passed,
    }
    if report.decomposition is not None:
        certificates["decomposition"] = decomposition_sections(report.decomposition)[1]
    return outputs, certificates


def hypercube_sections(report: HypercubeReport) -> Section:
    outputs, certificates = uniformity_sections(report.uniformity)
    outputs["densities"] = [density_out(check) for check in report.densities]
    certificates = {
        "uniformity": certificates,
        "eps": report.eps,
        "uniform_family_mass": report.uniform_family_mass,
        "densities_passed": all(check.passed for check in report.densities),
        "passed": report.passed,
    }
    return outputs, certificates


def strong_sections(result: GraphonStrongResult) -> Section:
    outputs = {
        "R": partition_out(result.R),
        "Z": partition_out(result.Z),
        "U": values_out(result.U.W),
        "steps": steps_out(result.steps),
    }
    certificates = {
        "err_lp": result.err_lp,
        "cut_gap": result.cut_gap,
        "cut_gap_bound": result.cut_gap_bound,
        "unf_sigma_norm": result.unf_sigma_norm,
        "unf_cut_norm": result.unf_cut_norm,
        "unf_bound": result.unf_bound,
        "size_bound": big(result.size_bound),
        "scale": result.scale,
        "passed": result.passed,
    }
    return outputs, certificates


def weak_sections(result: GraphonWeakResult) -> Section:
    outputs = {
        "R": partition_out(result.R),
        "log": [step.model_dump(mode="json") for step in result.log],
    }
    certificates = {
        "steps": result.steps,
        "step_bound": result.step_bound,
        "final_cut_norm": result.final_cut_norm,
        "max_growth_factor": max((step.growth_factor for step in result.log), default=1.0),
        "scale": result.scale,
        "passed": result.passed,
    }
    return outputs, certificates


def norm_sections(result: NormResult, separating: bool) -> Section:
    outputs = {
        "value": result.value,
        "witness": result.witness.set.indices(),
        "witness_integral": result.witness.value,
    }
    return outputs, {"exact": result.exact, "separating": separating, "passed": True}


# ------------------------------------------------------------
# REPORT DOCUMENTS
# ------------------------------------------------------------
def build_report(config: RunConfig, sections: Section, passed: bool) -> Report:
    outputs, certificates = sections
    return Report(
        operation=config.operation,
        config=config.model_dump(mode="json"),
        outputs=outputs,
        certificates=certificates,
        passed=passed,
    )


def dump_report(report: Report) -> str:
    document = report.model_dump(mode="json", exclude_none=False)
    if report.timings is None:
        document.pop("timings")
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def write_report(report: Report, path: Optional[Path]) -> str:
    text = dump_report(report)
    if path is None:
        return text
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    except OSError as e:
        raise IngestError(f"Cannot write report to {path}: {e}", {"path": str(path)})
    logger.info(f"Report written to {path}")
    return text


def load_report(path: Path) -> Report:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return Report.model_validate_json(f.read())
    except FileNotFoundError:
        raise IngestError(f"Report not found: {path}", {"path": str(path)})
    except ValidationError as e:
        raise IngestError(f"Malformed report {path}: {e.errors()[0]['msg']}", {"path": str(path)})


# ------------------------------------------------------------
# VERIFY (recompute certificates from input + report)
# ------------------------------------------------------------
def _close(recomputed: float, reported: float) -> bool:
    return math.isclose(recomputed, reported, rel_tol=1e-9, abs_tol=current_settings().TOLERANCE)


def _partition(lists: List[List[int]], size: int) -> Partition:
    try:
        return Partition.from_index_lists(lists, size)
    except RegularityError as e:
        raise IngestError(f"Report partition does not fit the input: {e.message}")


def _check_decomposition(
    g: RandomVar,
    P: Partition,
    Q: Partition,
    semirings: Sequence[Semiring],
    entries: List[Dict[str, Any]],
    cfg: RunConfig,
    checks: Dict[str, bool],
    prefix: str,
) -> None:
    space = semirings[0].space
    tol = current_settings().TOLERANCE
    last = len(semirings) - 1
    _, f_err, f_unf = split_parts(g, P, Q, space)
    checks[f"{prefix}Q_refines_P"] = Q.refines(P)
    checks[f"{prefix}err_lp"] = lp_norm(f_err, space, effective_exponent(cfg.p)) <= cfg.sigma + tol
    for entry in entries:
        sr = semirings[min(entry["index"], last)]
        measured = uniformity_norm(f_unf, sr, oracle_mode(sr, cfg.mode), seed=cfg.seed).value
        checks[f"{prefix}unf[{entry['index']}]"] = measured <= entry["bound"] + tol and _close(measured, entry["measured"])


def _verify_decompose(cfg: RunConfig, input_path: Path, report: Report, checks: Dict[str, bool]) -> None:
    base, f = ingest_matrix(input_path, cfg.format)
    sr = from_name(cfg.semiring, base)
    P = _partition(report.outputs["P"], sr.size)
    Q = _partition(report.outputs["Q"], sr.size)
    c = report.certificates
    checks["Q_members"] = all(sr.contains(cell) for cell in Q)
    F = parse_growth(cfg.growth_spec)
    checks["unf_bound"] = all(_close(entry["bound"], float(1 / F(len(P)))) for entry in c["unf_norms"])
    _check_decomposition(f / c["scale"], P, Q, [sr], c["unf_norms"], cfg, checks, "")


def _verify_multi(cfg: RunConfig, input_path: Path, report: Report, checks: Dict[str, bool]) -> None:
    base, family = ingest_family(input_path)
    semirings = [from_name(name.strip(), base) for name in cfg.semiring.split(",")]
    space = semirings[0].space
    P = _partition(report.outputs["P"], space.size)
    Q = _partition(report.outputs["Q"], space.size)
    for i, (f, c) in enumerate(zip(family, report.certificates["functions"])):
        _check_decomposition(f / c["scale"], P, Q, semirings, c["unf_norms"], cfg, checks, f"f{i}.")


def _verify_cells(g: RandomVar, sr: Semiring, P: Partition, eta: float, cells: List[Dict[str, Any]], cfg: RunConfig, checks: Dict[str, bool]) -> float:
    nonuniform = 0.0
    for index, (cell, reported) in enumerate(zip(P, cells)):
        verdict = is_uniform_cell(g, sr, cell, eta, mode=cfg.mode, seed=cfg.seed)
        checks[f"cell[{index}]"] = verdict.uniform == reported["uniform"]
        if not verdict.uniform:
            nonuniform += verdict.probability
    checks["nonuniform_mass"] = nonuniform <= eta + current_settings().TOLERANCE
    return nonuniform


def _verify_uniform(cfg: RunConfig, input_path: Path, report: Report, checks: Dict[str, bool]) -> None:
    base, f = ingest_matrix(input_path, cfg.format)
    sr = from_name(cfg.semiring, base)
    P = _partition(report.outputs["P"], sr.size)
    checks["P_members"] = all(sr.contains(cell) for cell in P)
    _verify_cells(f / report.certificates["scale"], sr, P, cfg.eta, report.outputs["cells"], cfg, checks)


def _verify_hypercube(cfg: RunConfig, input_path: Path, report: Report, checks: Dict[str, bool]) -> None:
    spec, D = ingest_hypercube(input_path)
    sr = hypercube_insensitive(spec)
    P = _partition(report.outputs["P"], sr.size)
    eta = cfg.eps ** 2
    _verify_cells(RandomVar.indicator_of(D), sr, P, eta, report.outputs["cells"], cfg, checks)
    for index, (cell, reported) in enumerate(zip(P, report.outputs["cells"])):
        if reported["uniform"]:
            checks[f"density[{index}]"] = check_relative_densities(D, sr, cell, cfg.eps).passed


def _verify_graphon_strong(cfg: RunConfig, input_path: Path, report: Report, checks: Dict[str, bool]) -> None:
    base, values = ingest_matrix(input_path, cfg.format, require_symmetric=True)
    W = Graphon(base, values)
    c = report.certificates
    scale = c["scale"]
    tol = current_settings().TOLERANCE
    R = _partition(report.outputs["R"], W.n)
    U = Graphon(base, RandomVar(report.outputs["U"]) / scale)
    F = parse_growth(cfg.growth_spec)

    err = lp_norm(W.W / scale - U.W, W.space, effective_exponent(cfg.p))
    gap = cut_norm_exact(U.W - step_graphon(U, R).W, base).value
    checks["err_lp"] = err <= cfg.eps + tol
    checks["cut_gap"] = gap <= float(to_fraction(F.schedule(len(R)))) + tol
    checks["reproduced"] = _close(err, c["err_lp"]) and _close(gap, c["cut_gap"])


def _verify_graphon_weak(cfg: RunConfig, input_path: Path, report: Report, checks: Dict[str, bool]) -> None:
    base, values = ingest_matrix(input_path, cfg.format, require_symmetric=True)
    scale = report.certificates["scale"]
    W = Graphon(base, values / scale)
    R = _partition(report.outputs["R"], W.n)
    final = cut_norm_exact(W.W - step_graphon(W, R).W, base).value
    checks["final_cut_norm"] = final <= cfg.eps + current_settings().TOLERANCE
    checks["step_bound"] = report.certificates["steps"] <= report.certificates["step_bound"]
    checks["reproduced"] = _close(final, report.certificates["final_cut_norm"])


def _verify_norm(cfg: RunConfig, input_path: Path, report: Report, checks: Dict[str, bool]) -> None:
    base, f = ingest_matrix(input_path, cfg.format)
    sr = from_name(cfg.semiring, base)
    result = uniformity_norm(f, sr, oracle_mode(sr, cfg.mode), seed=cfg.seed)
    checks["value"] = _close(result.value, report.outputs["value"])


def _verify_bounds(cfg: RunConfig, input_path: Optional[Path], report: Report, checks: Dict[str, bool]) -> None:
    F = parse_growth(cfg.growth_spec)
    sigma, p = cfg.bound_sigma, cfg.bound_p or "2"
    bound = reg_prime_bound(cfg.k, sigma, p, F) if cfg.prime else reg_bound(cfg.k, cfg.ell, sigma, p, F)
    checks["bounds"] = bounds_out(bound) == report.outputs["bounds"]


VERIFIERS: Dict[Operation, Callable[[RunConfig, Path, Report, Dict[str, bool]], None]] = {
    Operation.Decompose: _verify_decompose,
    Operation.Multi: _verify_multi,
    Operation.Uniform: _verify_uniform,
    Operation.Hypercube: _verify_hypercube,
    Operation.GraphonStrong: _verify_graphon_strong,
    Operation.GraphonWeak: _verify_graphon_weak,
    Operation.Norm: _verify_norm,
    Operation.Bounds: _verify_bounds,
}


def verify(input_path: Optional[Path], report: Report) -> Dict[str, bool]:
    """
    Recomputes every certificate of `report` from the original input with
    exact oracles. Returns one named check per certificate.
    """
    verifier = VERIFIERS.get(report.operation)
    if verifier is None:
        raise ConfigError(f"Reports of '{report.operation.value}' cannot be verified")
    try:
        cfg = RunConfig.model_validate(report.config)
    except ValidationError as e:
        raise IngestError(f"Report carries an invalid config: {e.errors()[0]['msg']}")

    if input_path is None and report.operation is not Operation.Bounds:
        raise ConfigError(f"Verifying a {report.operation.value} report needs --input")

    checks: Dict[str, bool] = {}
    try:
        verifier(cfg, input_path, report, checks)
    except (KeyError, TypeError) as e:
        raise IngestError(f"Report is missing a field needed for verification: {e}")

    failed = sorted(name for name, ok in checks.items() if not ok)
    if failed:
        logger.error(f"❌ Verification failed: {', '.join(failed)}")
    else:
        logger.success(f"✅ {len(checks)} certificates re-verified")
    return checks
