# app/api/endpoints/norm.py

from app.schemas.config import RunConfig
from app.schemas.report import Report
from app.services.decompose_service import oracle_mode
from app.services.ingest_service import ingest_matrix
from app.services.report_service import build_report, norm_sections
from app.services.semiring_service import from_name, is_norm_separating
from app.services.uniformity_service import uniformity_norm


def run_norm(config: RunConfig) -> Report:
    base, f = ingest_matrix(config.input, config.format)
    sr = from_name(config.semiring, base)
    result = uniformity_norm(f, sr, oracle_mode(sr, config.mode), seed=config.seed)
    return build_report(config, norm_sections(result, is_norm_separating(sr)), True)
