# app/api/endpoints/verify.py

from app.schemas.config import RunConfig
from app.schemas.report import Report
from app.services.report_service import build_report, load_report, verify


def run_verify(config: RunConfig) -> Report:
    report = load_report(config.report)
    checks = verify(config.input, report)
    passed = all(checks.values())
    outputs = {"verified_operation": report.operation.value, "reported_passed": report.passed}
    return build_report(config, (outputs, {"checks": checks, "passed": passed}), passed)
