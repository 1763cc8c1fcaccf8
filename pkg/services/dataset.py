from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

TREATMENT_COLUMN = "treatment"
CONVERSION_COLUMN = "conversion"
REVENUE_COLUMN = "revenue"


class DatasetError(RuntimeError):
    """Raised when uplift data cannot be loaded, validated or partitioned."""


@dataclass(frozen=True)
class CustomerRecord:
    covariates: tuple[float, ...]
    treatment: int
    conversion: int
    revenue: float


def _readonly(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class UpliftDataset:
    """Immutable column store of customer sessions: covariates, treatment, conversion, revenue.

    `ids` carries each record's position in the source it was loaded or generated
    from, so splits of a dataset can be traced back to the original rows.
    """

    covariates: np.ndarray
    treatment: np.ndarray
    conversion: np.ndarray
    revenue: np.ndarray
    feature_names: tuple[str, ...]
    ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        covariates = np.asarray(self.covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, len(self.feature_names))
        n = covariates.shape[0]
        treatment = np.asarray(self.treatment)
        conversion = np.asarray(self.conversion)
        revenue = np.asarray(self.revenue, dtype=float)
        ids = np.arange(n, dtype=np.int64) if self.ids is None else np.asarray(self.ids, dtype=np.int64)

        if covariates.shape[1] != len(self.feature_names):
            raise DatasetError(
                f"Covariate width {covariates.shape[1]} does not match {len(self.feature_names)} feature names."
            )
        for name, column in (("treatment", treatment), ("conversion", conversion), ("revenue", revenue), ("ids", ids)):
            if column.shape != (n,):
                raise DatasetError(f"Column {name} has shape {column.shape}, expected ({n},).")
        if not np.all(np.isfinite(covariates)):
            raise DatasetError("Covariates must be finite.")
        if not np.all(np.isin(treatment, (0, 1))):
            raise DatasetError("Treatment flags must be 0 or 1.")
        if not np.all(np.isin(conversion, (0, 1))):
            raise DatasetError("Conversion flags must be 0 or 1.")
        treatment = treatment.astype(np.int8)
        conversion = conversion.astype(np.int8)
        if not np.all(np.isfinite(revenue)) or np.any(revenue < 0):
            raise DatasetError("Revenue must be finite and non-negative.")
        inconsistent = np.flatnonzero((revenue > 0) & (conversion == 0))
        if inconsistent.size:
            raise DatasetError(
                f"Record {int(ids[inconsistent[0]])} has revenue {revenue[inconsistent[0]]} without conversion."
            )
        if not np.any(treatment == 1):
            raise DatasetError("Treatment group empty.")
        if not np.any(treatment == 0):
            raise DatasetError("Control group empty.")

        object.__setattr__(self, "covariates", _readonly(covariates))
        object.__setattr__(self, "treatment", _readonly(treatment))
        object.__setattr__(self, "conversion", _readonly(conversion))
        object.__setattr__(self, "revenue", _readonly(revenue))
        object.__setattr__(self, "ids", _readonly(ids))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @classmethod
    def from_records(cls, records: Sequence[CustomerRecord], feature_names: Sequence[str]) -> UpliftDataset:
        if not records:
            raise DatasetError("At least one record is required.")
        widths = {len(record.covariates) for record in records}
        if widths != {len(feature_names)}:
            raise DatasetError("All records must have one covariate per feature name.")
        return cls(
            covariates=np.array([record.covariates for record in records], dtype=float),
            treatment=np.array([record.treatment for record in records]),
            conversion=np.array([record.conversion for record in records]),
            revenue=np.array([record.revenue for record in records], dtype=float),
            feature_names=tuple(feature_names),
        )

    @property
    def n(self) -> int:
        return int(self.treatment.shape[0])

    @property
    def p(self) -> int:
        return len(self.feature_names)

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[CustomerRecord]:
        for i in range(self.n):
            yield self.record(i)

    def record(self, i: int) -> CustomerRecord:
        return CustomerRecord(
            covariates=tuple(float(v) for v in self.covariates[i]),
            treatment=int(self.treatment[i]),
            conversion=int(self.conversion[i]),
            revenue=float(self.revenue[i]),
        )

    def outcome(self, target: str = "revenue") -> np.ndarray:
        if target == "revenue":
            return self.revenue
        if target == "conversion":
            return self.conversion.astype(float)
        raise DatasetError(f"Unknown outcome {target!r}; expected 'revenue' or 'conversion'.")

    def subset(self, indices: Sequence[int] | np.ndarray) -> UpliftDataset:
        idx = np.asarray(indices, dtype=np.int64)
        return UpliftDataset(
            covariates=self.covariates[idx],
            treatment=self.treatment[idx],
            conversion=self.conversion[idx],
            revenue=self.revenue[idx],
            feature_names=self.feature_names,
            ids=self.ids[idx],
        )

    def concat(self, other: UpliftDataset) -> UpliftDataset:
        if other.feature_names != self.feature_names:
            raise DatasetError("Cannot concatenate datasets with different feature names.")
        return UpliftDataset(
            covariates=np.vstack([self.covariates, other.covariates]),
            treatment=np.concatenate([self.treatment, other.treatment]),
            conversion=np.concatenate([self.conversion, other.conversion]),
            revenue=np.concatenate([self.revenue, other.revenue]),
            feature_names=self.feature_names,
            ids=np.concatenate([self.ids, other.ids]),
        )

    def with_treatment(self, treatment: np.ndarray) -> UpliftDataset:
        return UpliftDataset(
            covariates=self.covariates,
            treatment=treatment,
            conversion=self.conversion,
            revenue=self.revenue,
            feature_names=self.feature_names,
            ids=self.ids,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.covariates, columns=list(self.feature_names))
        frame[TREATMENT_COLUMN] = self.treatment.astype(int)
        frame[CONVERSION_COLUMN] = self.conversion.astype(int)
        frame[REVENUE_COLUMN] = self.revenue
        return frame


@dataclass(frozen=True)
class GroupShares:
    n_t: int
    n_c: int

    @property
    def n(self) -> int:
        return self.n_t + self.n_c

    @property
    def q_t(self) -> float:
        return self.n_t / self.n

    @property
    def q_c(self) -> float:
        return self.n_c / self.n


@dataclass(frozen=True)
class GroupStats:
    sessions: int
    purchasers: int
    revenue_total: float

    @property
    def conversion_rate(self) -> float:
        return self.purchasers / self.sessions

    @property
    def revenue_per_person(self) -> float:
        return self.revenue_total / self.sessions


@dataclass(frozen=True)
class UpliftSummary:
    treatment: GroupStats
    control: GroupStats

    @property
    def sessions(self) -> int:
        return self.treatment.sessions + self.control.sessions

    @property
    def purchasers(self) -> int:
        return self.treatment.purchasers + self.control.purchasers

    @property
    def revenue_total(self) -> float:
        return self.treatment.revenue_total + self.control.revenue_total

    @property
    def treatment_share(self) -> float:
        return self.treatment.sessions / self.sessions

    @property
    def conversion_uplift(self) -> float:
        """Treatment minus control conversion rate, as a fraction (x100 for percentage points)."""
        return self.treatment.conversion_rate - self.control.conversion_rate

    @property
    def revenue_uplift(self) -> float:
        return self.treatment.revenue_per_person - self.control.revenue_per_person


class SplitSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    train_frac: float = Field(default=0.4, gt=0, lt=1)
    valid_frac: float = Field(default=0.3, gt=0, lt=1)
    test_frac: float = Field(default=0.3, gt=0, lt=1)
    seed: int | None = Field(default=None, ge=0, description="Unset inside a run means the run seed; 0 elsewhere.")

    @model_validator(mode="after")
    def _fractions_sum_to_one(self) -> SplitSpec:
        total = self.train_frac + self.valid_frac + self.test_frac
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"Split fractions must sum to 1, got {total!r}.")
        return self


class CsvSchema(BaseModel):
    """Column mapping for uplift CSV files; every other numeric column is a covariate."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    treatment: str = TREATMENT_COLUMN
    conversion: str = CONVERSION_COLUMN
    revenue: str = REVENUE_COLUMN
    covariates: list[str] | None = None
    ignore: list[str] = Field(default_factory=lambda: ["true_uplift", "score", "z_rw", "z_rg", "source_row"])


def _binary_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isin(values, (0.0, 1.0)))
    if bad.size:
        row = int(bad[0]) + 1
        raise DatasetError(f"Row {row}: column {column!r} must be 0 or 1, got {frame[column].iloc[bad[0]]!r}.")
    return values.astype(np.int8)


def _read_frame(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise DatasetError(f"Input file not found: {path}")
    try:
        return pd.read_csv(path, encoding="utf-8")
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise DatasetError(f"Failed to read CSV: {path}") from exc


def load_csv(path: str | Path, schema: CsvSchema | None = None) -> UpliftDataset:
    path = Path(path)
    return dataset_from_frame(_read_frame(path), schema, source=str(path))


def load_score_columns(
    path: str | Path, columns: Sequence[str], schema: CsvSchema | None = None
) -> tuple[UpliftDataset, dict[str, np.ndarray]]:
    """Load a dataset plus externally produced score columns; score columns are never covariates."""
    path = Path(path)
    frame = _read_frame(path)
    scores: dict[str, np.ndarray] = {}
    for column in columns:
        if column not in frame.columns:
            raise DatasetError(f"Missing score column {column!r} in {path}.")
        values = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise DatasetError(f"Row {int(bad[0]) + 1}: {column} must be a finite number.")
        scores[column] = values
    schema = schema or CsvSchema()
    extra = [column for column in columns if column not in schema.ignore]
    if extra:
        schema = schema.model_copy(update={"ignore": [*schema.ignore, *extra]})
    return dataset_from_frame(frame, schema, source=str(path)), scores


def dataset_from_frame(frame: pd.DataFrame, schema: CsvSchema | None = None, source: str = "frame") -> UpliftDataset:
    schema = schema or CsvSchema()

    for column in (schema.treatment, schema.conversion, schema.revenue):
        if column not in frame.columns:
            raise DatasetError(f"Missing column {column!r} in {source}.")

    treatment = _binary_column(frame, schema.treatment)
    conversion = _binary_column(frame, schema.conversion)
    revenue = pd.to_numeric(frame[schema.revenue], errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(revenue) | (revenue < 0))
    if bad.size:
        raise DatasetError(f"Row {int(bad[0]) + 1}: revenue must be a non-negative number.")
    bad = np.flatnonzero((revenue > 0) & (conversion == 0))
    if bad.size:
        raise DatasetError(f"Row {int(bad[0]) + 1}: revenue {revenue[bad[0]]} recorded with conversion=0.")

    reserved = {schema.treatment, schema.conversion, schema.revenue, *schema.ignore}
    if schema.covariates is not None:
        missing = [name for name in schema.covariates if name not in frame.columns]
        if missing:
            raise DatasetError(f"Missing covariate columns {missing} in {source}.")
        feature_names = list(schema.covariates)
    else:
        feature_names = []
        for name in frame.columns:
            if name in reserved:
                continue
            if not pd.api.types.is_numeric_dtype(frame[name]):
                logger.warning("Skipping non-numeric column %s in %s", name, source)
                continue
            feature_names.append(str(name))

    covariates = frame[feature_names].to_numpy(dtype=float) if feature_names else np.empty((len(frame), 0))
    bad_rows = np.flatnonzero(~np.all(np.isfinite(covariates), axis=1))
    if bad_rows.size:
        raise DatasetError(f"Row {int(bad_rows[0]) + 1}: covariates must be finite (no missing values).")

    dataset = UpliftDataset(
        covariates=covariates,
        treatment=treatment,
        conversion=conversion,
        revenue=revenue,
        feature_names=tuple(feature_names),
    )
    logger.info("Loaded %s records with %s covariates from %s", dataset.n, dataset.p, source)
    return dataset


def write_csv(
    dataset: UpliftDataset,
    path: str | Path,
    extra_columns: dict[str, np.ndarray] | None = None,
) -> Path:
    path = Path(path)
    frame = dataset.to_frame()
    for name, values in (extra_columns or {}).items():
        frame[name] = np.asarray(values)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    except OSError as exc:
        raise DatasetError(f"Failed to write CSV: {path}") from exc
    return path


def group_shares(dataset: UpliftDataset) -> GroupShares:
    n_t = int(np.count_nonzero(dataset.treatment == 1))
    return GroupShares(n_t=n_t, n_c=dataset.n - n_t)


def summary_from_counts(
    sessions_t: int,
    purchasers_t: int,
    revenue_t: float,
    sessions_c: int,
    purchasers_c: int,
    revenue_c: float,
) -> UpliftSummary:
    for label, sessions, purchasers in (("treatment", sessions_t, purchasers_t), ("control", sessions_c, purchasers_c)):
        if sessions <= 0:
            raise DatasetError(f"{label.capitalize()} group empty.")
        if not 0 <= purchasers <= sessions:
            raise DatasetError(f"{label.capitalize()} purchasers must lie in [0, sessions].")
    return UpliftSummary(
        treatment=GroupStats(sessions=sessions_t, purchasers=purchasers_t, revenue_total=float(revenue_t)),
        control=GroupStats(sessions=sessions_c, purchasers=purchasers_c, revenue_total=float(revenue_c)),
    )


def summarize(dataset: UpliftDataset) -> UpliftSummary:
    treated = dataset.treatment == 1
    control = ~treated
    return summary_from_counts(
        sessions_t=int(np.count_nonzero(treated)),
        purchasers_t=int(np.count_nonzero(dataset.conversion[treated])),
        revenue_t=math.fsum(dataset.revenue[treated]),
        sessions_c=int(np.count_nonzero(control)),
        purchasers_c=int(np.count_nonzero(dataset.conversion[control])),
        revenue_c=math.fsum(dataset.revenue[control]),
    )


def partition(dataset: UpliftDataset, spec: SplitSpec) -> tuple[UpliftDataset, UpliftDataset, UpliftDataset]:
    """Seeded uniform shuffle into train/valid/test; floor-sized valid and test, remainder to train."""
    n = dataset.n
    if n < 3:
        raise DatasetError("Partitioning requires at least 3 records.")
    n_valid = math.floor(spec.valid_frac * n + 1e-9)
    n_test = math.floor(spec.test_frac * n + 1e-9)
    n_train = n - n_valid - n_test

    order = np.random.default_rng(spec.seed or 0).permutation(n)
    pieces = (order[:n_train], order[n_train : n_train + n_valid], order[n_train + n_valid :])

    splits: list[UpliftDataset] = []
    for name, idx in zip(("train", "valid", "test"), pieces, strict=True):
        treated = int(np.count_nonzero(dataset.treatment[idx] == 1))
        if idx.size == 0 or treated == 0 or treated == idx.size:
            raise DatasetError(
                f"The {name} split of {idx.size} records lacks a treatment or control record; "
                "re-seed the split or provide more data."
            )
        splits.append(dataset.subset(np.sort(idx)))

    logger.info("Partitioned %s records into %s/%s/%s", n, n_train, n_valid, n_test)
    return splits[0], splits[1], splits[2]


def repeat_seed(seed: int, repeat: int) -> int:
    """Seed of the `repeat`-th independent partition; repeat 0 keeps `seed` itself."""
    if repeat < 0:
        raise DatasetError(f"Repeat index must be non-negative, got {repeat}.")
    if repeat == 0:
        return seed
    return int(np.random.SeedSequence([seed, repeat]).generate_state(1)[0])
