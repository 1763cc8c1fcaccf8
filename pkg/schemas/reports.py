from __future__ import annotations

from typing import Any

import numpy as np
from pydantic import BaseModel, Field

from services.dataset import GroupStats, UpliftSummary
from services.evaluation import (
    WEIGHTED_QINI_BINS,
    QiniCurve,
    SignificanceResult,
    mean_qini,
    qini_coefficient,
    top_decile_values,
    weighted_qini,
)
from services.profit import ProfitReport
from services.selection import Selection


class GroupReport(BaseModel):
    sessions: int
    share_of_sessions: float
    purchasers: int
    conversion_rate: float
    revenue_total: float
    revenue_per_person: float

    @classmethod
    def from_stats(cls, stats: GroupStats, total_sessions: int) -> GroupReport:
        return cls(
            sessions=stats.sessions,
            share_of_sessions=stats.sessions / total_sessions,
            purchasers=stats.purchasers,
            conversion_rate=stats.conversion_rate,
            revenue_total=stats.revenue_total,
            revenue_per_person=stats.revenue_per_person,
        )


class SignificanceReport(BaseModel):
    test: str = "pearson_chi2"
    statistic: float
    p_value: float
    dof: int


class DatasetSummaryReport(BaseModel):
    treatment: GroupReport
    control: GroupReport
    sessions: int
    purchasers: int
    revenue_total: float
    conversion_uplift_pp: float = Field(description="Conversion uplift in percentage points.")
    revenue_uplift: float
    significance: SignificanceReport | None = None

    @classmethod
    def build(cls, summary: UpliftSummary, significance: SignificanceResult | None = None) -> DatasetSummaryReport:
        return cls(
            treatment=GroupReport.from_stats(summary.treatment, summary.sessions),
            control=GroupReport.from_stats(summary.control, summary.sessions),
            sessions=summary.sessions,
            purchasers=summary.purchasers,
            revenue_total=summary.revenue_total,
            conversion_uplift_pp=100.0 * summary.conversion_uplift,
            revenue_uplift=summary.revenue_uplift,
            significance=None
            if significance is None
            else SignificanceReport(
                statistic=significance.statistic, p_value=significance.p_value, dof=significance.dof
            ),
        )


class QiniReport(BaseModel):
    name: str
    spec: dict[str, Any] | None = None
    outcome: str
    bins: int
    n: int
    per_person: bool
    scaled: bool
    qini_coefficient: float
    weighted_qini: float | None = Field(default=None, description="Only defined for 10 bins.")
    weighted_qini_normalized: bool = False
    mean_qini: float
    top_deciles: list[float]
    curve: list[float]
    baseline: list[float]

    @classmethod
    def build(
        cls,
        name: str,
        curve: QiniCurve,
        outcome: str,
        top_k: int = 3,
        normalized: bool = False,
        spec: dict[str, Any] | None = None,
    ) -> QiniReport:
        weighted = weighted_qini(curve.values, normalized=normalized) if curve.bins == WEIGHTED_QINI_BINS else None
        return cls(
            name=name,
            spec=spec,
            outcome=outcome,
            bins=curve.bins,
            n=curve.n,
            per_person=curve.per_person,
            scaled=curve.scaled,
            qini_coefficient=qini_coefficient(curve),
            weighted_qini=weighted,
            weighted_qini_normalized=normalized,
            mean_qini=mean_qini(curve),
            top_deciles=top_decile_values(curve, min(top_k, curve.bins)),
            curve=[float(value) for value in curve.values],
            baseline=[float(value) for value in curve.baseline],
        )


class CandidateReport(BaseModel):
    index: int
    label: str
    spec: dict[str, Any]
    qini: float | None
    error: str | None = None


class SelectionReport(BaseModel):
    name: str
    kind: str
    stage: str
    metric: str
    best_index: int
    best_spec: dict[str, Any]
    candidates: list[CandidateReport]
    meta: dict[str, Any] = Field(default_factory=dict, description="Wall-clock fit times; not reproducible.")

    @classmethod
    def build(cls, name: str, selection: Selection, metric: str) -> SelectionReport:
        return cls(
            name=name,
            kind=selection.spec.kind.value,
            stage=selection.spec.stage.value,
            metric=metric,
            best_index=selection.best.index,
            best_spec=selection.spec.model_dump(mode="json"),
            candidates=[
                CandidateReport(
                    index=candidate.index,
                    label=candidate.spec.label,
                    spec=candidate.spec.model_dump(mode="json"),
                    qini=candidate.qini,
                    error=candidate.error,
                )
                for candidate in selection.candidates
            ],
            meta={"fit_seconds": [candidate.fit_seconds for candidate in selection.candidates]},
        )


class StrategyOutcome(BaseModel):
    name: str
    label: str
    qini_coefficient: float
    weighted_qini: float | None
    best_profit_decile: int | None = None
    best_profit: float | None = None

    @classmethod
    def build(cls, name: str, label: str, qini: QiniReport, profit: ProfitReport | None) -> StrategyOutcome:
        best = None if profit is None else profit.lines[profit.best_depth - 1]
        return cls(
            name=name,
            label=label,
            qini_coefficient=qini.qini_coefficient,
            weighted_qini=qini.weighted_qini,
            best_profit_decile=None if best is None else best.depth,
            best_profit=None if best is None else best.profit,
        )


class RepeatReport(BaseModel):
    repeat: int
    split_seed: int | None = Field(description="None when the run read pre-split files.")
    seed: int
    strategies: list[StrategyOutcome]


def _mean_or_none(values: list[float | None]) -> float | None:
    if any(value is None for value in values):
        return None
    return float(np.mean(values))


class StrategyAggregate(BaseModel):
    name: str
    qini_coefficients: list[float]
    qini_mean: float
    qini_se: float | None = Field(default=None, description="Standard error across repeats; needs two or more.")
    weighted_qini_mean: float | None = None
    best_profit_mean: float | None = None

    @classmethod
    def across(cls, outcomes: list[StrategyOutcome]) -> StrategyAggregate:
        values = np.array([outcome.qini_coefficient for outcome in outcomes])
        return cls(
            name=outcomes[0].name,
            qini_coefficients=values.tolist(),
            qini_mean=float(values.mean()),
            qini_se=float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else None,
            weighted_qini_mean=_mean_or_none([outcome.weighted_qini for outcome in outcomes]),
            best_profit_mean=_mean_or_none([outcome.best_profit for outcome in outcomes]),
        )


class RunMeta(BaseModel):
    started_at: str
    finished_at: str
    project: str


class RunSummaryReport(BaseModel):
    seed: int
    repeats: int = 1
    sizes: dict[str, int]
    dataset: DatasetSummaryReport
    strategies: list[StrategyAggregate]
    runs: list[RepeatReport]
    meta: RunMeta | None = None

    @staticmethod
    def aggregate(runs: list[RepeatReport]) -> list[StrategyAggregate]:
        """Per strategy, the test Qini of every repeat with its mean and standard error."""
        return [
            StrategyAggregate.across([run.strategies[index] for run in runs])
            for index in range(len(runs[0].strategies))
        ]


class ErrorDetail(BaseModel):
    type: str
    message: str
    stage: str
    path: str | None = None


class ErrorReport(BaseModel):
    error: ErrorDetail
