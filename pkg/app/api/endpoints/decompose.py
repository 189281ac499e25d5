# app/api/endpoints/decompose.py

from app.models.growth import parse_growth
from app.schemas.config import RunConfig
from app.schemas.report import Report
from app.services.decompose_service import decompose, decompose_multi
from app.services.ingest_service import ingest_family, ingest_matrix
from app.services.report_service import build_report, decomposition_sections, multi_sections
from app.services.semiring_service import from_name


# ===================================================================
# 1. DECOMPOSE (one function, one semiring)
# ===================================================================
def run_decompose(config: RunConfig) -> Report:
    base, f = ingest_matrix(config.input, config.format)
    sr = from_name(config.semiring, base)
    result = decompose(
        f, sr, config.p, config.sigma, parse_growth(config.growth_spec),
        mode=config.mode, strict=config.strict, seed=config.seed,
    )
    return build_report(config, decomposition_sections(result), result.certificates.passed)


# ===================================================================
# 2. MULTI (a family over an increasing semiring sequence)
# ===================================================================
def run_multi(config: RunConfig) -> Report:
    # --semiring takes a comma separated sequence, smallest first
    base, family = ingest_family(config.input)
    semirings = [from_name(name.strip(), base) for name in config.semiring.split(",")]
    result = decompose_multi(
        family, semirings, config.p, config.sigma, parse_growth(config.growth_spec),
        mode=config.mode, strict=config.strict, seed=config.seed,
    )
    return build_report(config, multi_sections(result), result.passed)
