# app/core/constants.py

from enum import IntEnum

# ==========================================================
# PROCESS EXIT CODES
# ==========================================================
class ExitCode(IntEnum):
    OK = 0
    CONFIG_ERROR = 2
    EXACT_INFEASIBLE = 3
    CERTIFICATE_FAILURE = 4
    IO_ERROR = 5

# ==========================================================
# REPORTS
# ==========================================================
REPORT_SCHEMA_VERSION = "1.0"

# ==========================================================
# GROWTH FUNCTION PRESETS (CLI mini-language)
# ==========================================================
GROWTH_SUCCESSOR = "succ"
GROWTH_AFFINE = "affine"
GROWTH_UNIFORM_PARTITION = "prop42"
GROWTH_STRONG_GRAPHON = "cor45"
GROWTH_TABLE = "table"

DEFAULT_GROWTH_SPEC = GROWTH_SUCCESSOR
DEFAULT_GRAPHON_SCHEDULE = "cor45:h=recip"
