"""
Base Pydantic schemas for command reports.
"""

import uuid
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field

from app.core.config import settings


def new_run_id() -> str:
    return str(uuid.uuid4())


class BaseReport(BaseModel):
    """Envelope shared by every report written by the command-line tool."""

    success: bool = Field(description="Whether the command ran to completion")
    message: str = Field(description="Human-readable summary of the result")
    command: str = Field(description="Subcommand that produced the report")
    run_id: str = Field(default_factory=new_run_id)
    timestamp: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    project: str = Field(default_factory=lambda: settings.PROJECT_NAME)
    version: str = Field(default_factory=lambda: settings.VERSION)

    model_config = {
        "json_schema_extra": {
            "example": {
                "success": True,
                "message": "Reverse duality holds",
                "command": "verify",
            }
        }
    }


class ErrorReport(BaseModel):
    """Structured error body written to stderr."""

    error: bool = Field(True, description="Always true for error reports")
    error_code: str = Field(description="Machine-readable error code")
    message: str
    run_id: str = Field(default_factory=new_run_id)
    timestamp: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    exit_code: int
    details: Optional[Dict[str, Any]] = None

    model_config = {
        "json_schema_extra": {
            "example": {
                "error": True,
                "error_code": "RESOURCE_CAP_EXCEEDED",
                "message": "dense_matrix needs 4096.0 MB, above the 1024 MB cap",
                "exit_code": 2,
                "details": {"resource": "dense_matrix"},
            }
        }
    }
