from __future__ import annotations

import itertools
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from services.dataset import CsvSchema, SplitSpec
from services.learners import LearnerSpec
from services.profit import CostModel
from services.strategies import SecondStageTarget, SmoteOptions, Stage, StrategyKind, StrategySpec, default_grid
from services.transforms import Target

_LEARNER_ADAPTER: TypeAdapter[LearnerSpec] = TypeAdapter(LearnerSpec)


class LearnerGrid(BaseModel):
    """A learner id plus hyperparameters; list values are expanded as a cartesian product.

    `{"id": "ridge", "alpha": [0.01, 1]}` expands to two ridge specs.
    """

    model_config = ConfigDict(extra="allow", frozen=True)

    id: str

    def expand(self) -> list[LearnerSpec]:
        params = dict(self.model_extra or {})
        names = sorted(params)
        choices = [value if isinstance(value, list) else [value] for value in (params[name] for name in names)]
        return [
            _LEARNER_ADAPTER.validate_python({"id": self.id, **dict(zip(names, combo, strict=True))})
            for combo in itertools.product(*choices)
        ]


class StrategyGrid(BaseModel):
    """One strategy kind and stage with its candidate learners.

    When neither `classifiers` nor `regressors` is given the built-in default grid is used.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str | None = None
    kind: StrategyKind
    stage: Stage = Stage.one_stage
    classifiers: list[LearnerGrid] | None = None
    regressors: list[LearnerGrid] | None = None
    target: Target = Target.revenue
    smote: SmoteOptions = SmoteOptions()
    crvtw_second_stage: SecondStageTarget = SecondStageTarget.transformed

    @property
    def label(self) -> str:
        return self.name or f"{self.kind.value}_{self.stage.value}"

    def expand(self) -> list[StrategySpec]:
        shared = {
            "kind": self.kind,
            "stage": self.stage,
            "target": self.target,
            "smote": self.smote,
            "crvtw_second_stage": self.crvtw_second_stage,
        }
        if self.classifiers is None and self.regressors is None:
            return [StrategySpec(**{**dict(spec), **shared}) for spec in default_grid(self.kind, self.stage)]
        classifiers = [spec for grid in self.classifiers or [] for spec in grid.expand()] or [None]
        regressors = [spec for grid in self.regressors or [] for spec in grid.expand()] or [None]
        return [
            StrategySpec(classifier=classifier, regressor=regressor, **shared)
            for classifier, regressor in itertools.product(classifiers, regressors)
        ]


class DataSources(BaseModel):
    """Either one `input` file to partition, or pre-split `train`/`valid`/`test` files."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    input: Path | None = None
    train: Path | None = None
    valid: Path | None = None
    test: Path | None = None
    csv: CsvSchema = CsvSchema()

    @model_validator(mode="after")
    def _one_layout(self) -> DataSources:
        presplit = [self.train, self.valid, self.test]
        if self.input is not None and any(path is not None for path in presplit):
            raise ValueError("Give either 'input' or 'train'/'valid'/'test', not both.")
        if self.input is None and any(path is None for path in presplit):
            raise ValueError("Give 'input' or all of 'train', 'valid' and 'test'.")
        return self

    def resolve(self, base: Path) -> DataSources:
        updates = {}
        for name in ("input", "train", "valid", "test"):
            path = getattr(self, name)
            if path is not None and not path.is_absolute():
                updates[name] = base / path
        return self.model_copy(update=updates)


class EvaluationOptions(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    bins: int = Field(default=10, ge=2)
    per_person: bool = False
    scaled: bool = False
    normalized_weighted_qini: bool = False
    metric: Literal["qini_revenue", "qini_conversion"] = "qini_revenue"
    top_k: int = Field(default=3, ge=1)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    data: DataSources
    split: SplitSpec = SplitSpec()
    strategies: list[StrategyGrid] = Field(min_length=1)
    evaluation: EvaluationOptions = EvaluationOptions()
    costs: CostModel = CostModel()
    output_dir: Path | None = None
    seed: int | None = Field(default=None, ge=0)
    n_jobs: int | None = Field(default=None, ge=1)
    repeats: int = Field(
        default=1, ge=1, description="Independent random partitions, each with its own selection, refit and test."
    )

    @model_validator(mode="after")
    def _unique_strategy_names(self) -> RunConfig:
        labels = [grid.label for grid in self.strategies]
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise ValueError(f"Strategy names must be unique; set 'name' for {duplicates}.")
        return self

    @model_validator(mode="after")
    def _repeats_need_one_input(self) -> RunConfig:
        if self.repeats > 1 and self.data.input is None:
            raise ValueError("Repeated partitions need a single 'input' file, not pre-split files.")
        return self

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        """Parse a JSON run configuration; relative data paths resolve against the file's directory."""
        path = Path(path)
        config = cls.model_validate_json(path.read_text(encoding="utf-8"))
        return config.model_copy(update={"data": config.data.resolve(path.parent)})


class PublishedCounts(BaseModel):
    """Aggregate group counts as printed in a descriptive-statistics table."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    sessions_t: int = Field(gt=0)
    purchasers_t: int = Field(ge=0)
    revenue_t: float = Field(default=0.0, ge=0)
    sessions_c: int = Field(gt=0)
    purchasers_c: int = Field(ge=0)
    revenue_c: float = Field(default=0.0, ge=0)
