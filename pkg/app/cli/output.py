"""
Report and table writers.

JSON goes through orjson with numpy support; tables are long-format CSV
written by pandas with a header row and '.' as decimal separator.
"""

import logging
from pathlib import Path
from typing import Any, List, Optional, Sequence, Union

import click
import numpy as np
import orjson
import pandas as pd

from app.schemas.base import BaseReport
from app.schemas.reports import RunReport
from app.schemas.experiment import OutputFormat

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS


def _default(value: Any) -> Any:
    if isinstance(value, complex):
        return {"real": value.real, "imag": value.imag}
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"Type {type(value).__name__} is not JSON serializable")


def dumps(payload: Any) -> bytes:
    if isinstance(payload, BaseReport):
        payload = payload.model_dump()
    return orjson.dumps(payload, default=_default, option=JSON_OPTIONS)


class OutputWriter:
    """Writes the artifacts of one run into a directory and remembers their paths."""

    def __init__(self, directory: Union[str, Path], formats: Optional[Sequence[OutputFormat]] = None):
        self.directory = Path(directory)
        self.formats = set(formats or (OutputFormat.JSON, OutputFormat.CSV))
        self.files: List[str] = []

    def _path(self, name: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        self.files.append(str(path))
        return path

    def json(self, name: str, payload: Any) -> Optional[Path]:
        if OutputFormat.JSON not in self.formats:
            return None
        path = self._path(name)
        path.write_bytes(dumps(payload))
        logger.info(f"Wrote {path}")
        return path

    def csv(self, name: str, frame: pd.DataFrame) -> Optional[Path]:
        if OutputFormat.CSV not in self.formats:
            return None
        path = self._path(name)
        frame.to_csv(path, index=False, float_format="%.17g")
        logger.info(f"Wrote {len(frame)} rows to {path}")
        return path

    def report(self, name: str, report: RunReport) -> Path:
        """The run report is always written, whatever the format selection."""
        path = self._path(name)
        report.files = list(self.files)
        path.write_bytes(dumps(report))
        return path


def echo_report(report: BaseReport) -> None:
    click.echo(dumps(report).decode())
