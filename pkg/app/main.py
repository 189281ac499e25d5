import json
import sys
from typing import List, Optional

from loguru import logger

from app.api.cli import config_from_args, parse, run
from app.core.config import settings
from app.core.constants import ExitCode
from app.core.exceptions import RegularityError
from app.services.report_service import write_report


# ------------------------------------------------------------
# LOGURU CONFIGURATION
# ------------------------------------------------------------
def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = "DEBUG" if verbose else "WARNING" if quiet else settings.LOG_LEVEL.upper()
    logger.remove()
    logger.add(
        sys.stderr,
        level=level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
               "<level>{level}</level> | "
               "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
               "<level>{message}</level>",
        colorize=True,
        backtrace=True,
        diagnose=settings.DEBUG,
    )


# ------------------------------------------------------------
# ENTRY POINT
# ------------------------------------------------------------
def main(argv: Optional[List[str]] = None) -> int:
    args = parse(argv)
    configure_logging(args.verbose, args.quiet)

    try:
        config = config_from_args(args)
        report = run(config)
        text = write_report(report, config.output)
        if config.output is None:
            sys.stdout.write(text)
    except RegularityError as e:
        logger.error(f"❌ {e.code}: {e.message}")
        sys.stderr.write(json.dumps(e.to_dict(), sort_keys=True, default=str) + "\n")
        return int(e.exit_code)
    except Exception:
        logger.exception("Unhandled error")
        return int(ExitCode.CERTIFICATE_FAILURE)

    if not report.passed:
        logger.error(f"❌ {config.operation.value}: certificates failed")
        return int(ExitCode.CERTIFICATE_FAILURE)
    logger.success(f"✅ {config.operation.value}: certificates passed")
    return int(ExitCode.OK)


if __name__ == "__main__":
    sys.exit(main())
