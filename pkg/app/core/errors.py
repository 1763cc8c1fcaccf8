from __future__ import annotations

import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from enum import IntEnum
from pathlib import Path

import typer
from pydantic import ValidationError

from schemas.reports import ErrorDetail, ErrorReport
from services.dataset import DatasetError
from services.evaluation import EvaluationError
from services.learners import LearnerError
from services.pipeline import PipelineError
from services.profit import ProfitError
from services.reporting import ReportingError, ReportStore
from services.selection import SelectionError
from services.strategies import StrategyError
from services.synthgen import SynthError
from services.transforms import TransformError

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    ok = 0
    usage = 1
    data = 2
    fit = 3


_DATA_ERRORS = (DatasetError, SynthError, TransformError, EvaluationError, ProfitError, ReportingError, OSError)
_FIT_ERRORS = (LearnerError, StrategyError, SelectionError)


def exit_code_for(exc: BaseException) -> ExitCode:
    if isinstance(exc, PipelineError) and exc.__cause__ is not None:
        return exit_code_for(exc.__cause__)
    if isinstance(exc, (ValidationError, ValueError, typer.BadParameter)):
        return ExitCode.usage
    if isinstance(exc, _FIT_ERRORS):
        return ExitCode.fit
    return ExitCode.data


def error_report(exc: BaseException, stage: str, path: Path | str | None = None) -> ErrorReport:
    root = exc.__cause__ if isinstance(exc, PipelineError) and exc.__cause__ is not None else exc
    if isinstance(exc, PipelineError):
        stage = exc.stage
        path = exc.path or path
    if path is None and isinstance(root, OSError) and root.filename:
        path = root.filename
    message = str(exc)
    if isinstance(root, OSError) and root.strerror:
        message = f"{root.strerror}: {root.filename}" if root.filename else root.strerror
    return ErrorReport(
        error=ErrorDetail(
            type=type(root).__name__,
            message=message,
            stage=stage,
            path=None if path is None else str(path),
        )
    )


_HANDLED = (PipelineError, ValidationError, ValueError, *_DATA_ERRORS, *_FIT_ERRORS)


@contextmanager
def report_errors(stage: str, output_dir: Path | None = None, path: Path | None = None) -> Iterator[None]:
    """Turn domain failures into an error JSON on stderr (and `<output_dir>/error.json`) plus an exit code."""
    try:
        yield
    except _HANDLED as exc:
        report = error_report(exc, stage, path)
        code = exit_code_for(exc)
        logger.error("%s failed: %s", report.error.stage, report.error.message)
        sys.stderr.write(report.model_dump_json() + "\n")
        if output_dir is not None:
            try:
                ReportStore(output_dir).write_json("error.json", report)
            except ReportingError:
                logger.warning("Could not write error.json to %s", output_dir)
        raise typer.Exit(code=int(code)) from exc
