# app/core/exceptions.py

import math
from typing import Any, Dict, Optional

from app.core.constants import ExitCode

_LOG10_2 = math.log10(2)


class RegularityError(Exception):
    """
    Base class for every error the library raises on purpose.
    `code` is machine readable and ends up in the CLI's JSON error document.
    """
    code = "REGULARITY_ERROR"
    exit_code = ExitCode.CERTIFICATE_FAILURE

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"error": {"code": self.code, "message": self.message, "details": self.details}}


# ------------------------------------------------------------
# BAD INPUT (exit 2)
# ------------------------------------------------------------
class ConfigError(RegularityError, ValueError):
    code = "CONFIG_ERROR"
    exit_code = ExitCode.CONFIG_ERROR


class PreconditionError(RegularityError, ValueError):
    code = "PRECONDITION_FAILED"
    exit_code = ExitCode.CONFIG_ERROR


class DimensionMismatchError(RegularityError, ValueError):
    code = "DIMENSION_MISMATCH"
    exit_code = ExitCode.CONFIG_ERROR


class NotAMemberError(RegularityError, ValueError):
    code = "NOT_A_MEMBER"
    exit_code = ExitCode.CONFIG_ERROR


# ------------------------------------------------------------
# SEARCH LIMITS (exit 3)
# ------------------------------------------------------------
class ExactSearchInfeasibleError(RegularityError):
    code = "EXACT_INFEASIBLE"
    exit_code = ExitCode.EXACT_INFEASIBLE

    def __init__(self, message: str, estimated_size: int, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, {"estimated_size": str(estimated_size), **(details or {})})
        self.estimated_size = estimated_size


class EnumerationBudgetExceeded(RegularityError):
    code = "ENUMERATION_TRUNCATED"
    exit_code = ExitCode.EXACT_INFEASIBLE

    def __init__(self, budget: int, yielded: int):
        super().__init__(
            f"Member enumeration stopped after {yielded} members (budget {budget})",
            {"budget": budget, "yielded": yielded},
        )
        self.budget = budget
        self.yielded = yielded


# ------------------------------------------------------------
# BROKEN GUARANTEES (exit 4)
# ------------------------------------------------------------
class CertificateFailure(RegularityError):
    code = "CERTIFICATE_FAILED"
    exit_code = ExitCode.CERTIFICATE_FAILURE


class InternalInvariantError(RegularityError):
    code = "INTERNAL_INVARIANT"
    exit_code = ExitCode.CERTIFICATE_FAILURE


# ------------------------------------------------------------
# I/O (exit 5)
# ------------------------------------------------------------
class IngestError(RegularityError):
    code = "INPUT_ERROR"
    exit_code = ExitCode.IO_ERROR


# ------------------------------------------------------------
# INTERNAL SIGNALS
# ------------------------------------------------------------
class BoundOverflow(Exception):
    """Raised while iterating a growth function once the numbers get too large to hold."""

    def __init__(self, digits_estimate: int, stage: str = ""):
        self.digits_estimate = digits_estimate
        self.stage = stage
        super().__init__(f"Bound overflow at {stage or 'evaluation'} ({self.magnitude})")

    @property
    def magnitude(self) -> str:
        """`~N digits`, or `~10^M digits` when N is itself too long to print."""
        digits = int(self.digits_estimate)
        if digits.bit_length() <= 64:
            return f"~{digits} digits"
        return f"~10^{int(digits.bit_length() * _LOG10_2)} digits"
