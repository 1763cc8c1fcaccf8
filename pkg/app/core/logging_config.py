from __future__ import annotations

import json
import logging
from logging.config import dictConfig

from app.core.config import Settings

PLAIN_FORMAT = "%(levelname)s %(asctime)s %(name)s %(message)s"

# Third-party loggers that are chatty at INFO.
_QUIET_LOGGERS = ("joblib", "matplotlib", "numexpr")


class JsonLineFormatter(logging.Formatter):
    """One JSON object per record with level, time, logger and message."""

    def format(self, record: logging.LogRecord) -> str:
        document = {
            "level": record.levelname,
            "time": self.formatTime(record),
            "logger": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            document["exception"] = self.formatException(record.exc_info)
        return json.dumps(document, ensure_ascii=False)


def configure_logging(settings: Settings, level: str | None = None) -> None:
    """Route all logging to stderr; `level` overrides `settings.log_level`."""
    log_level = (level or settings.log_level).upper()
    if not isinstance(logging.getLevelName(log_level), int):
        raise ValueError(f"Unknown log level {log_level!r}.")

    formatters: dict[str, dict[str, object]] = {
        "standard": {"()": JsonLineFormatter} if settings.log_json else {"format": PLAIN_FORMAT},
    }
    handlers: dict[str, dict[str, object]] = {
        "stderr": {
            "class": "logging.StreamHandler",
            "formatter": "standard",
            "stream": "ext://sys.stderr",
        }
    }

    dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": formatters,
            "handlers": handlers,
            "root": {"level": log_level, "handlers": ["stderr"]},
            "loggers": {name: {"level": "WARNING"} for name in _QUIET_LOGGERS},
        }
    )
