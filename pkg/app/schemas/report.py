# app/schemas/report.py

from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field

from app import __version__
from app.core.constants import REPORT_SCHEMA_VERSION
from app.models.enums import Operation


class Report(BaseModel):
    """
    The single JSON document a run writes. Partitions are lists of sorted
    index lists, functions are value arrays and big integers are decimal
    strings, so the document is plain JSON and diffs cleanly.
    """
    model_config = ConfigDict(frozen=True)

    schema_version: str = REPORT_SCHEMA_VERSION
    tool_version: str = __version__
    operation: Operation
    config: Dict[str, Any]
    outputs: Dict[str, Any] = {}
    certificates: Dict[str, Any] = {}
    passed: bool
    timings: Optional[Dict[str, float]] = Field(default=None)
