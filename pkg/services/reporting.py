from __future__ import annotations

import json
import logging
from pathlib import Path

import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)


class ReportingError(RuntimeError):
    """Raised when a report cannot be written to the output directory."""


class ReportStore:
    """Persist JSON and CSV reports below one output directory."""

    def __init__(self, root: Path) -> None:
        self._root = Path(root)

    @property
    def root(self) -> Path:
        return self._root

    def _target(self, relative: str | Path) -> Path:
        path = self._root / relative
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ReportingError(f"Cannot create report directory {path.parent}.") from exc
        return path

    def write_json(self, relative: str | Path, document: BaseModel | dict[str, object]) -> Path:
        path = self._target(relative)
        if isinstance(document, BaseModel):
            text = document.model_dump_json(indent=2)
        else:
            text = json.dumps(document, indent=2, ensure_ascii=False)
        try:
            path.write_text(text + "\n", encoding="utf-8")
        except OSError as exc:
            raise ReportingError(f"Failed to write {path}.") from exc
        logger.debug("Wrote %s", path)
        return path

    def write_frame(self, relative: str | Path, frame: pd.DataFrame) -> Path:
        path = self._target(relative)
        try:
            frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
        except OSError as exc:
            raise ReportingError(f"Failed to write {path}.") from exc
        logger.debug("Wrote %s", path)
        return path

    def read_json(self, relative: str | Path) -> dict[str, object]:
        path = self._root / relative
        if not path.exists():
            raise ReportingError(f"Report not found at {path}.")
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ReportingError(f"Invalid JSON in {path}.") from exc
