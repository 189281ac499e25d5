# app/api/endpoints/uniform.py

from app.schemas.config import RunConfig
from app.schemas.report import Report
from app.services.application_service import hypercube_uniform, uniform_partition
from app.services.ingest_service import ingest_hypercube, ingest_matrix
from app.services.report_service import build_report, hypercube_sections, uniformity_sections
from app.services.semiring_service import from_name


# ===================================================================
# 1. UNIFORM PARTITIONS
# ===================================================================
def run_uniform(config: RunConfig) -> Report:
    base, f = ingest_matrix(config.input, config.format)
    sr = from_name(config.semiring, base)
    result = uniform_partition(f, sr, config.p, config.eta, mode=config.mode, strict=config.strict, seed=config.seed)
    return build_report(config, uniformity_sections(result), result.passed)


# ===================================================================
# 2. HYPERCUBE REGULARITY
# ===================================================================
def run_hypercube(config: RunConfig) -> Report:
    spec, D = ingest_hypercube(config.input)
    result = hypercube_uniform(D, spec, config.eps, accept_cost=config.accept_cost, mode=config.mode, seed=config.seed)
    return build_report(config, hypercube_sections(result), result.passed)
