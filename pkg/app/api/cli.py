# app/api/cli.py

import argparse
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional

from loguru import logger
from pydantic import ValidationError

from app import __version__
from app.api.endpoints.bounds import run_bounds
from app.api.endpoints.decompose import run_decompose, run_multi
from app.api.endpoints.graphon import run_graphon_strong, run_graphon_weak
from app.api.endpoints.norm import run_norm
from app.api.endpoints.uniform import run_hypercube, run_uniform
from app.api.endpoints.verify import run_verify
from app.core.config import settings_scope
from app.core.exceptions import ConfigError
from app.models.enums import Operation, RunMode
from app.models.growth import to_fraction
from app.schemas.config import RunConfig
from app.schemas.report import Report

ROUTES: Dict[Operation, Callable[[RunConfig], Report]] = {
    Operation.Decompose: run_decompose,
    Operation.Multi: run_multi,
    Operation.Uniform: run_uniform,
    Operation.Hypercube: run_hypercube,
    Operation.GraphonStrong: run_graphon_strong,
    Operation.GraphonWeak: run_graphon_weak,
    Operation.Norm: run_norm,
    Operation.Bounds: run_bounds,
    Operation.Verify: run_verify,
}

HELP = {
    Operation.Decompose: "f = f_str + f_err + f_unf over one semiring",
    Operation.Multi: "one decomposition for a family over an increasing semiring sequence",
    Operation.Uniform: "partition whose non-uniform cells carry mass <= eta",
    Operation.Hypercube: "uniform partition of a subset of A^n with density checks",
    Operation.GraphonStrong: "strong regularity for a symmetric matrix",
    Operation.GraphonWeak: "weak (cut norm) regularity for a symmetric matrix",
    Operation.Norm: "uniformity norm of a matrix over a semiring",
    Operation.Bounds: "evaluate the Reg / Reg' complexity bounds",
    Operation.Verify: "recompute the certificates of an earlier report",
}


# ------------------------------------------------------------
# PARSER
# ------------------------------------------------------------
def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", type=Path, help="Input file (matrix CSV/JSON, family JSON or hypercube JSON)")
    common.add_argument("--format", default="csv", choices=["csv", "json"], help="Matrix input format")
    common.add_argument("--semiring", default="rectangles", help="Semiring name (comma separated sequence for multi)")
    common.add_argument("--p", default="2", help="Exponent p (a/b accepted)")
    common.add_argument("--sigma", help="L_p error budget sigma")
    common.add_argument("--eta", help="Uniformity slack eta")
    common.add_argument("--eps", help="Accuracy eps")
    common.add_argument("--growth", help="Growth function spec, e.g. succ, affine:2,1, cor45:h=recip")
    common.add_argument("--mode", default=RunMode.Exact.value, choices=[m.value for m in RunMode])
    common.add_argument("--tol", type=float, default=1e-9, help="Absolute tolerance for certificate checks")
    common.add_argument("--seed", type=int, default=0, help="Seed for heuristic oracles")
    common.add_argument("--caps", default="", help="Cap overrides as NAME=VALUE,... (e.g. CUT_NORM_CAP=12)")
    common.add_argument("--strict", action="store_true", help="Refuse inputs with ||f||_p > 1 instead of rescaling")
    common.add_argument("--accept-cost", action="store_true", help="Lift the hypercube size caps")
    common.add_argument("--output", type=Path, help="Report path (stdout when omitted)")
    common.add_argument("--stable-output", action="store_true", help="Omit timings so reports are byte-identical")
    common.add_argument("--k", type=int, default=1, help="Semiring constant k (bounds)")
    common.add_argument("--ell", type=int, default=1, help="Family size (bounds)")
    common.add_argument("--prime", action="store_true", help="Compute Reg' instead of Reg (bounds)")
    common.add_argument("--report", type=Path, help="Earlier report to verify")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regularity",
        description="Certified regularity decompositions over finite probability spaces.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="operation", required=True, metavar="OPERATION")
    common = _common_flags()
    for operation in Operation:
        sub.add_parser(operation.value, parents=[common], help=HELP[operation])
    return parser


def _parse_caps(text: str) -> Dict[str, int]:
    caps = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        name, separator, value = item.partition("=")
        if not separator:
            raise ConfigError(f"Cap override '{item}' must look like NAME=VALUE")
        try:
            caps[name.strip()] = int(value)
        except ValueError:
            raise ConfigError(f"Cap {name} needs an integer, got '{value}'")
    return caps


def _number(value: Optional[str], name: str) -> Optional[float]:
    return None if value is None else float(to_fraction(value, name))


def config_from_args(args: argparse.Namespace) -> RunConfig:
    operation = Operation(args.operation)
    bounds = operation is Operation.Bounds
    try:
        return RunConfig(
            operation=operation,
            input=args.input,
            format=args.format,
            semiring=args.semiring,
            p=_number(args.p, "p"),
            sigma=None if bounds else _number(args.sigma, "sigma"),
            eta=_number(args.eta, "eta"),
            eps=_number(args.eps, "eps"),
            growth=args.growth,
            mode=args.mode,
            strict=args.strict,
            accept_cost=args.accept_cost,
            tol=args.tol,
            seed=args.seed,
            caps=_parse_caps(args.caps),
            output=args.output,
            stable_output=args.stable_output,
            k=args.k,
            ell=args.ell,
            prime=args.prime,
            bound_sigma=args.sigma if bounds else None,
            bound_p=args.p if bounds else None,
            report=args.report,
        )
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"Invalid configuration: {first['msg']}", {"field": ".".join(str(x) for x in first["loc"])})


# ------------------------------------------------------------
# DISPATCH
# ------------------------------------------------------------
def run(config: RunConfig) -> Report:
    """Runs one operation under the config's tolerance, seed and caps."""
    with settings_scope(**config.settings_overrides()):
        started = time.perf_counter()
        logger.info(f"▶️ {config.operation.value} started")
        report = ROUTES[config.operation](config)
        elapsed = time.perf_counter() - started

    logger.info(f"{config.operation.value} finished in {elapsed:.3f}s")
    if config.stable_output:
        return report
    return report.model_copy(update={"timings": {"total_seconds": elapsed}})


def parse(argv: Optional[List[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)
