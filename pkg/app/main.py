from __future__ import annotations

import sys
from collections.abc import Sequence

import click
import typer

from app.core.config import get_settings
from app.core.errors import ExitCode
from app.core.logging_config import configure_logging
from commands import data, modeling


def _include_commands(app: typer.Typer, router: typer.Typer) -> None:
    app.registered_commands.extend(router.registered_commands)


def create_app() -> typer.Typer:
    settings = get_settings()
    app = typer.Typer(name="uplift", help=settings.project_name, add_completion=False, no_args_is_help=True)

    @app.callback()
    def configure(
        log_level: str | None = typer.Option(None, "--log-level", help="Overrides UPLIFT_LOG_LEVEL."),
        json_logs: bool = typer.Option(False, "--json-logs", help="One JSON object per log line."),
    ) -> None:
        active = settings.model_copy(update={"log_json": True}) if json_logs else settings
        try:
            configure_logging(active, level=log_level)
        except ValueError as exc:
            raise typer.BadParameter(str(exc), param_hint="--log-level") from exc

    _include_commands(app, data.router)
    _include_commands(app, modeling.router)
    return app


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return its exit code; usage errors map to 1."""
    command = typer.main.get_command(create_app())
    try:
        result = command.main(
            args=list(argv) if argv is not None else None, prog_name="uplift", standalone_mode=False
        )
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return int(ExitCode.usage)
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return int(ExitCode.usage)
    # non-standalone click returns the code of a typer.Exit instead of raising it
    return result if isinstance(result, int) else int(ExitCode.ok)
