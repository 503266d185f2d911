"""
Error handling for the command-line tool.

Every subcommand runs inside handle_errors, which turns exceptions into a
structured JSON error body on stderr and a machine-parsable exit code.
"""

import functools
import logging
import traceback
from typing import Any, Callable

import click
import orjson
from pydantic import ValidationError

from app.core.exceptions import (
    EXIT_INVALID_INPUT,
    EXIT_NUMERICAL_FAILURE,
    DualityLabException,
    get_exit_code,
)
from app.schemas.base import ErrorReport, new_run_id

logger = logging.getLogger(__name__)


def emit_error(report: ErrorReport) -> None:
    click.echo(orjson.dumps(report.model_dump(), option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY).decode(), err=True)


def _report_for_exception(exc: Exception, run_id: str) -> ErrorReport:
    if isinstance(exc, DualityLabException):
        exit_code = get_exit_code(exc)
        log_level = logging.ERROR if exit_code == EXIT_NUMERICAL_FAILURE else logging.WARNING
        logger.log(
            log_level,
            f"Command failed: {exc.error_code}",
            extra={"exception_type": type(exc).__name__, "run_id": run_id, "details": exc.details},
        )
        return ErrorReport(
            error_code=exc.error_code,
            message=exc.message,
            run_id=run_id,
            exit_code=exit_code,
            details=exc.details or None,
        )

    if isinstance(exc, ValidationError):
        logger.warning("Configuration validation error", extra={"run_id": run_id})
        return ErrorReport(
            error_code="CONFIGURATION_ERROR",
            message="Experiment document failed validation",
            run_id=run_id,
            exit_code=EXIT_INVALID_INPUT,
            details={"validation_errors": [error["msg"] for error in exc.errors()]},
        )

    logger.error(
        f"Unexpected exception: {type(exc).__name__}",
        extra={"run_id": run_id, "traceback": traceback.format_exc()},
    )
    return ErrorReport(
        error_code="INTERNAL_ERROR",
        message=f"An unexpected error occurred: {exc}",
        run_id=run_id,
        exit_code=EXIT_NUMERICAL_FAILURE,
        details={"exception_type": type(exc).__name__},
    )


def handle_errors(command: Callable[..., Any]) -> Callable[..., Any]:
    """Wrap a click callback so failures exit with the mapped code."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        ctx = click.get_current_context()
        run_id = getattr(ctx.obj, "run_id", None) or new_run_id()
        try:
            return command(*args, **kwargs)
        except (click.exceptions.Exit, click.ClickException):
            raise
        except Exception as exc:
            report = _report_for_exception(exc, run_id)
            emit_error(report)
            ctx.exit(report.exit_code)

    return wrapper
