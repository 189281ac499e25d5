# app/api/endpoints/bounds.py

from app.models.growth import parse_growth
from app.schemas.config import RunConfig
from app.schemas.report import Report
from app.services.bounds_service import reg_bound, reg_prime_bound
from app.services.report_service import bounds_out, build_report


def run_bounds(config: RunConfig) -> Report:
    F = parse_growth(config.growth_spec)
    sigma, p = config.bound_sigma, config.bound_p or "2"
    if config.prime:
        result = reg_prime_bound(config.k, sigma, p, F)
    else:
        result = reg_bound(config.k, config.ell, sigma, p, F)
    # An overflowed bound is reported, not a failure
    return build_report(config, ({"bounds": bounds_out(result)}, {"overflowed": result.overflowed}), True)
