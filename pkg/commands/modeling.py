from __future__ import annotations

from pathlib import Path

import typer

from app.core.config import get_settings
from app.core.errors import report_errors
from schemas.config import EvaluationOptions, RunConfig
from services.dataset import load_csv, load_score_columns, write_csv
from services.pipeline import UpliftRunner, evaluate_scores
from services.profit import CostModel
from services.reporting import ReportStore
from services.strategies import load_strategy, score

router = typer.Typer(add_completion=False)


@router.command("run")
def run_command(
    config: Path = typer.Option(..., "--config", help="JSON run configuration."),
    out_dir: Path | None = typer.Option(None, "--out-dir", help="Overrides the configured output directory."),
    seed: int | None = typer.Option(None, "--seed", min=0),
    jobs: int | None = typer.Option(None, "--jobs", min=1, help="Parallel candidate fits."),
) -> None:
    """Select, refit, score and evaluate every configured strategy."""
    settings = get_settings()
    with report_errors("config", output_dir=out_dir, path=config):
        run_config = RunConfig.from_file(config)
    output_dir = out_dir or run_config.output_dir or settings.reports_path
    runner = UpliftRunner(
        run_config,
        output_dir=output_dir,
        seed=next(value for value in (seed, run_config.seed, settings.seed) if value is not None),
        n_jobs=next(value for value in (jobs, run_config.n_jobs, settings.n_jobs) if value is not None),
        project=settings.project_name,
    )
    with report_errors("run", output_dir=output_dir):
        runner.run()
    typer.echo(str(output_dir))


@router.command("evaluate")
def evaluate_command(
    scores: Path = typer.Option(..., "--scores", help="Uplift CSV with a score column."),
    out_dir: Path = typer.Option(..., "--out-dir"),
    score_column: str = typer.Option("score", "--score-column"),
    benchmark_column: str | None = typer.Option(
        None, "--benchmark-column", help="Second ranking of the same records; adds its profit and the relative gain."
    ),
    name: str = typer.Option("scores", "--name", help="Label stored in qini.json."),
    bins: int = typer.Option(10, "--bins", min=2),
    per_person: bool = typer.Option(False, "--per-person"),
    scaled: bool = typer.Option(False, "--scaled"),
    normalized: bool = typer.Option(False, "--normalized", help="Normalize the weighted Qini."),
    conversion: bool = typer.Option(False, "--conversion", help="Evaluate conversion instead of revenue; no profit."),
    discount: float = typer.Option(0.0, "--discount", help="Relative discount granted to responders."),
    contact_cost: float = typer.Option(0.0, "--contact-cost", help="Cost per contacted customer."),
) -> None:
    """Decile table, Qini curve and campaign profit for externally produced scores."""
    if conversion and benchmark_column is not None:
        raise typer.BadParameter("A benchmark compares profit, which conversion evaluations do not report.")
    with report_errors("evaluate", output_dir=out_dir, path=scores):
        options = EvaluationOptions(
            bins=bins,
            per_person=per_person,
            scaled=scaled,
            normalized_weighted_qini=normalized,
            metric="qini_conversion" if conversion else "qini_revenue",
        )
        costs = CostModel(discount=discount, contact_cost=contact_cost)
        columns = [score_column] if benchmark_column is None else [score_column, benchmark_column]
        data, values = load_score_columns(scores, columns)
        qini, _ = evaluate_scores(
            ReportStore(out_dir),
            name,
            values[score_column],
            data,
            options=options,
            costs=costs,
            benchmark=None if benchmark_column is None else values[benchmark_column],
        )
    typer.echo(qini.model_dump_json(indent=2))


@router.command("score")
def score_command(
    model: Path = typer.Option(..., "--model", help="model.json written by run."),
    input: Path = typer.Option(..., "--input", help="Uplift CSV with the covariates the model was fitted on."),
    out: Path = typer.Option(..., "--out", help="CSV with a score column appended."),
    score_column: str = typer.Option("score", "--score-column"),
) -> None:
    """Score a dataset with a saved strategy; the output feeds `evaluate`."""
    with report_errors("score", path=model):
        fitted = load_strategy(ReportStore(model.parent).read_json(model.name))
    with report_errors("score", path=input):
        data = load_csv(input)
        write_csv(data, out, extra_columns={score_column: score(fitted, data)})
    typer.echo(str(out))
