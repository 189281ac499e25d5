# app/api/endpoints/graphon.py

from app.models.growth import parse_growth
from app.models.structures import Graphon
from app.schemas.config import RunConfig
from app.schemas.report import Report
from app.services.graphon_service import graphon_strong_regularity, graphon_weak_regularity
from app.services.ingest_service import ingest_matrix
from app.services.report_service import build_report, strong_sections, weak_sections


def _read_graphon(config: RunConfig) -> Graphon:
    base, values = ingest_matrix(config.input, config.format, require_symmetric=True)
    return Graphon(base, values)


# ===================================================================
# 1. STRONG REGULARITY
# ===================================================================
def run_graphon_strong(config: RunConfig) -> Report:
    W = _read_graphon(config)
    result = graphon_strong_regularity(W, config.p, config.eps, parse_growth(config.growth_spec), strict=config.strict)
    return build_report(config, strong_sections(result), result.passed)


# ===================================================================
# 2. WEAK REGULARITY
# ===================================================================
def run_graphon_weak(config: RunConfig) -> Report:
    W = _read_graphon(config)
    result = graphon_weak_regularity(W, config.p, config.eps, strict=config.strict)
    return build_report(config, weak_sections(result), result.passed)
