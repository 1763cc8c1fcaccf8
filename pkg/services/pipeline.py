from __future__ import annotations

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from schemas.config import EvaluationOptions, RunConfig, StrategyGrid
from schemas.reports import (
    DatasetSummaryReport,
    QiniReport,
    RepeatReport,
    RunMeta,
    RunSummaryReport,
    SelectionReport,
    StrategyOutcome,
)
from services.dataset import DatasetError, UpliftDataset, load_csv, partition, repeat_seed, summarize
from services.evaluation import EvaluationError, conversion_significance, decile_table, qini_curve
from services.learners import LearnerError
from services.profit import CostModel, ProfitError, ProfitReport, profit_report
from services.reporting import ReportingError, ReportStore
from services.selection import SelectionError, select_model
from services.strategies import StrategyError, score
from services.transforms import TransformError

logger = logging.getLogger(__name__)

_STAGE_ERRORS = (
    DatasetError,
    TransformError,
    LearnerError,
    StrategyError,
    SelectionError,
    EvaluationError,
    ProfitError,
    ReportingError,
)


class PipelineError(RuntimeError):
    """Raised when a stage of an uplift run fails; the original error is the cause."""

    def __init__(self, message: str, stage: str, path: Path | None = None) -> None:
        super().__init__(message)
        self.stage = stage
        self.path = path


@contextmanager
def _stage(name: str, path: Path | None = None) -> Iterator[None]:
    try:
        yield
    except _STAGE_ERRORS as exc:
        raise PipelineError(str(exc), stage=name, path=path) from exc


def evaluate_scores(
    store: ReportStore,
    name: str,
    scores: np.ndarray,
    data: UpliftDataset,
    options: EvaluationOptions | None = None,
    costs: CostModel | None = None,
    spec: dict[str, object] | None = None,
    prefix: str | Path = "",
    benchmark: np.ndarray | None = None,
) -> tuple[QiniReport, ProfitReport | None]:
    """Decile table and Qini curve of one score vector, written as qini.json and deciles.csv.

    Revenue evaluations also write profit.csv; a `benchmark` ranking of the same
    records adds its profit and the relative gain over it per decile.
    """
    options = options or EvaluationOptions()
    outcome = "conversion" if options.metric == "qini_conversion" else "revenue"
    table = decile_table(scores, data, bins=options.bins, outcome=outcome)
    curve = qini_curve(table, per_person=options.per_person, scaled=options.scaled)
    qini = QiniReport.build(
        name,
        curve,
        outcome=outcome,
        top_k=options.top_k,
        normalized=options.normalized_weighted_qini,
        spec=spec,
    )

    prefix = Path(prefix)
    store.write_json(prefix / "qini.json", qini)
    store.write_frame(prefix / "deciles.csv", table.to_frame())
    if outcome == "conversion":
        return qini, None

    profit = profit_report(table, costs)
    reference = None
    if benchmark is not None:
        reference = profit_report(decile_table(benchmark, data, bins=options.bins), costs)
    store.write_frame(prefix / "profit.csv", profit.to_frame(benchmark=reference))
    return qini, profit


class UpliftRunner:
    """Split, select, score and evaluate every strategy grid of a run configuration.

    With `repeats > 1` the whole loop runs once per independent random partition
    and reports land below `repeat_<r>/`.
    """

    def __init__(self, config: RunConfig, output_dir: Path, seed: int = 0, n_jobs: int = 1, project: str = "") -> None:
        self._config = config
        self._seed = seed
        self._n_jobs = n_jobs
        self._project = project
        self._store = ReportStore(output_dir)
        self._data: UpliftDataset | None = None

    @property
    def store(self) -> ReportStore:
        return self._store

    def split_seed(self, repeat: int = 0) -> int | None:
        if self._config.data.input is None:
            return None
        configured = self._config.split.seed
        return repeat_seed(self._seed if configured is None else configured, repeat)

    def _source(self) -> UpliftDataset:
        if self._data is None:
            sources = self._config.data
            with _stage("load", sources.input):
                self._data = load_csv(sources.input, sources.csv)  # type: ignore[arg-type]
        return self._data

    def load(self, repeat: int = 0) -> tuple[UpliftDataset, UpliftDataset, UpliftDataset]:
        sources = self._config.data
        if sources.input is not None:
            data = self._source()
            split = self._config.split.model_copy(update={"seed": self.split_seed(repeat)})
            with _stage("split", sources.input):
                return partition(data, split)
        splits = []
        for path in (sources.train, sources.valid, sources.test):
            with _stage("load", path):
                splits.append(load_csv(path, sources.csv))  # type: ignore[arg-type]
        return splits[0], splits[1], splits[2]

    def _summary(self, data: UpliftDataset) -> DatasetSummaryReport:
        with _stage("summarize"):
            summary = summarize(data)
        try:
            significance = conversion_significance(summary)
        except EvaluationError as exc:
            logger.warning("Skipping significance test: %s", exc)
            significance = None
        return DatasetSummaryReport.build(summary, significance)

    def _run_strategy(
        self,
        grid: StrategyGrid,
        splits: tuple[UpliftDataset, UpliftDataset, UpliftDataset],
        seed: int,
        prefix: Path,
    ) -> StrategyOutcome:
        train, valid, test = splits
        name = grid.label
        folder = prefix / name
        options = self._config.evaluation
        with _stage(f"select:{name}"):
            selection = select_model(
                grid.kind,
                grid.expand(),
                train,
                valid,
                metric=options.metric,
                bins=options.bins,
                seed=seed,
                n_jobs=self._n_jobs,
            )
        with _stage(f"evaluate:{name}"):
            scores = score(selection.model, test)
            qini, profit = evaluate_scores(
                self._store,
                name,
                scores,
                test,
                options=options,
                costs=self._config.costs,
                spec=selection.spec.model_dump(mode="json"),
                prefix=folder,
            )
            self._store.write_json(folder / "selection.json", SelectionReport.build(name, selection, options.metric))
            self._store.write_json(folder / "model.json", selection.model.to_dict())  # type: ignore[attr-defined]
        logger.info("%s: test Q=%.6g", folder, qini.qini_coefficient)
        return StrategyOutcome.build(name, selection.spec.label, qini, profit)

    def _run_repeat(self, repeat: int, splits: tuple[UpliftDataset, UpliftDataset, UpliftDataset]) -> RepeatReport:
        seed = repeat_seed(self._seed, repeat)
        prefix = Path(f"repeat_{repeat}") if self._config.repeats > 1 else Path()
        outcomes = [self._run_strategy(grid, splits, seed, prefix) for grid in self._config.strategies]
        return RepeatReport(repeat=repeat, split_seed=self.split_seed(repeat), seed=seed, strategies=outcomes)

    def run(self) -> RunSummaryReport:
        started_at = datetime.now(timezone.utc).isoformat()
        logger.info("Starting uplift run into %s (%s repeats)", self._store.root, self._config.repeats)
        train, valid, test = self.load(0)
        dataset = self._summary(train.concat(valid).concat(test))
        sizes = {"train": train.n, "valid": valid.n, "test": test.n}

        runs = [self._run_repeat(0, (train, valid, test))]
        runs.extend(self._run_repeat(repeat, self.load(repeat)) for repeat in range(1, self._config.repeats))
        report = RunSummaryReport(
            seed=self._seed,
            repeats=self._config.repeats,
            sizes=sizes,
            dataset=dataset,
            strategies=RunSummaryReport.aggregate(runs),
            runs=runs,
            meta=RunMeta(
                started_at=started_at,
                finished_at=datetime.now(timezone.utc).isoformat(),
                project=self._project,
            ),
        )
        with _stage("report"):
            self._store.write_json("summary.json", report)
        logger.info("Uplift run completed with %s strategies", len(report.strategies))
        return report
