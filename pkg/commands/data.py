from __future__ import annotations

from pathlib import Path

import typer

from app.core.config import get_settings
from app.core.errors import report_errors
from schemas.config import PublishedCounts
from schemas.reports import DatasetSummaryReport
from services.dataset import SplitSpec, load_csv, partition, summarize, summary_from_counts, write_csv
from services.evaluation import EvaluationError, conversion_significance
from services.reporting import ReportStore
from services.synthgen import GeneratorSpec, generate, true_uplift_batch
from services.transforms import Target, crvtw, rdt

router = typer.Typer(add_completion=False)


@router.command("generate")
def generate_command(
    spec: Path = typer.Option(..., "--spec", help="JSON generator spec."),
    out: Path = typer.Option(..., "--out", help="CSV file to write."),
    seed: int | None = typer.Option(None, "--seed", help="Overrides the generator seed."),
) -> None:
    """Write a synthetic uplift dataset with its true per-record uplift."""
    with report_errors("generate", path=spec):
        generator = GeneratorSpec.model_validate_json(spec.read_text(encoding="utf-8"))
        if seed is not None:
            generator = GeneratorSpec.model_validate({**generator.model_dump(), "seed": seed})
        data = generate(generator)
    with report_errors("generate", path=out):
        write_csv(data, out, extra_columns={"true_uplift": true_uplift_batch(generator, data.covariates)})
    typer.echo(str(out))


@router.command("summarize")
def summarize_command(
    input: Path | None = typer.Option(None, "--input", help="Uplift CSV file."),
    counts: Path | None = typer.Option(
        None, "--counts", help="JSON with sessions/purchasers/revenue per group instead of row-level data."
    ),
    out: Path | None = typer.Option(None, "--out", help="Also write the summary JSON here."),
) -> None:
    """Group sizes, conversion and revenue per group, uplift and a chi-squared test."""
    if (input is None) == (counts is None):
        raise typer.BadParameter("Give exactly one of --input or --counts.")
    source = input or counts
    with report_errors("summarize", path=source):
        if input is not None:
            summary = summarize(load_csv(input))
        else:
            published = PublishedCounts.model_validate_json(counts.read_text(encoding="utf-8"))  # type: ignore[union-attr]
            summary = summary_from_counts(**published.model_dump())
        try:
            significance = conversion_significance(summary)
        except EvaluationError:
            significance = None
        report = DatasetSummaryReport.build(summary, significance)
        if out is not None:
            ReportStore(out.parent).write_json(out.name, report)
    typer.echo(report.model_dump_json(indent=2))


@router.command("split")
def split_command(
    input: Path = typer.Option(..., "--input", help="Uplift CSV file."),
    out_dir: Path = typer.Option(..., "--out-dir", help="Directory for train.csv, valid.csv and test.csv."),
    train_frac: float = typer.Option(0.4, "--train-frac"),
    valid_frac: float = typer.Option(0.3, "--valid-frac"),
    test_frac: float = typer.Option(0.3, "--test-frac"),
    seed: int | None = typer.Option(None, "--seed"),
) -> None:
    """Seeded random train/validation/test partition."""
    with report_errors("split", output_dir=out_dir, path=input):
        spec = SplitSpec(
            train_frac=train_frac,
            valid_frac=valid_frac,
            test_frac=test_frac,
            seed=get_settings().seed if seed is None else seed,
        )
        for name, part in zip(("train", "valid", "test"), partition(load_csv(input), spec), strict=True):
            write_csv(part, out_dir / f"{name}.csv", extra_columns={"source_row": part.ids})
    typer.echo(str(out_dir))


@router.command("transform")
def transform_command(
    input: Path = typer.Option(..., "--input", help="Uplift CSV file."),
    out: Path = typer.Option(..., "--out", help="CSV with z_rw and z_rg appended."),
    target: Target = typer.Option(Target.revenue, "--target"),
) -> None:
    """Export the weighted and discretized transformed targets for inspection."""
    with report_errors("transform", path=input):
        data = load_csv(input)
        write_csv(data, out, extra_columns={"z_rw": crvtw(data, target).values, "z_rg": rdt(data, target).values})
    typer.echo(str(out))
