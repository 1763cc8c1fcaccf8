from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.stats import chi2_contingency

from services.dataset import UpliftDataset, UpliftSummary
from services.transforms import Target

logger = logging.getLogger(__name__)

WEIGHTED_QINI_BINS = 10


class EvaluationError(RuntimeError):
    """Raised when scores cannot be evaluated against a dataset."""


@dataclass(frozen=True, eq=False)
class DecileTable:
    """Per-bin group counts and outcome sums, bins ordered by descending score."""

    outcome: Target
    n_treatment: np.ndarray
    n_control: np.ndarray
    sum_treatment: np.ndarray
    sum_control: np.ndarray
    conversions_treatment: np.ndarray
    conversions_control: np.ndarray

    @property
    def bins(self) -> int:
        return int(self.n_treatment.shape[0])

    @property
    def sizes(self) -> np.ndarray:
        return self.n_treatment + self.n_control

    @property
    def n(self) -> int:
        return int(self.sizes.sum())

    @property
    def mean_treatment(self) -> np.ndarray:
        return self.sum_treatment / self.n_treatment

    @property
    def mean_control(self) -> np.ndarray:
        return self.sum_control / self.n_control

    @property
    def incremental(self) -> np.ndarray:
        return (self.mean_treatment - self.mean_control) * self.sizes

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "decile": np.arange(1, self.bins + 1),
                "n_treatment": self.n_treatment,
                "n_control": self.n_control,
                "mean_treatment": self.mean_treatment,
                "mean_control": self.mean_control,
                "conversions_treatment": self.conversions_treatment,
                "conversions_control": self.conversions_control,
                "incremental": self.incremental,
            }
        )


def _check_scores(scores: np.ndarray, data: UpliftDataset) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (data.n,):
        raise EvaluationError(f"Expected {data.n} scores, got shape {scores.shape}.")
    if not np.all(np.isfinite(scores)):
        raise EvaluationError("Scores must be finite.")
    return scores


def rank_order(scores: np.ndarray) -> np.ndarray:
    """Record indices by descending score; ties keep the original order."""
    scores = np.asarray(scores, dtype=float)
    return np.lexsort((np.arange(scores.shape[0]), -scores))


def decile_table(
    scores: np.ndarray,
    data: UpliftDataset,
    bins: int = 10,
    outcome: Target | str = Target.revenue,
) -> DecileTable:
    outcome = Target(outcome)
    scores = _check_scores(scores, data)
    if bins < 2:
        raise EvaluationError(f"At least 2 bins are required, got {bins}.")
    if bins > data.n:
        raise EvaluationError(f"Cannot split {data.n} records into {bins} bins.")

    values = data.outcome(outcome.value)
    columns: dict[str, list[float]] = {key: [] for key in ("nt", "nc", "st", "sc", "ct", "cc")}
    for number, members in enumerate(np.array_split(rank_order(scores), bins), start=1):
        treated = data.treatment[members] == 1
        if treated.all() or not treated.any():
            group = "control" if treated.all() else "treatment"
            raise EvaluationError(f"Bin {number} has no {group} records; try fewer bins.")
        columns["nt"].append(int(treated.sum()))
        columns["nc"].append(int((~treated).sum()))
        columns["st"].append(float(values[members][treated].sum()))
        columns["sc"].append(float(values[members][~treated].sum()))
        columns["ct"].append(int(data.conversion[members][treated].sum()))
        columns["cc"].append(int(data.conversion[members][~treated].sum()))

    return DecileTable(
        outcome=outcome,
        n_treatment=np.asarray(columns["nt"], dtype=np.int64),
        n_control=np.asarray(columns["nc"], dtype=np.int64),
        sum_treatment=np.asarray(columns["st"]),
        sum_control=np.asarray(columns["sc"]),
        conversions_treatment=np.asarray(columns["ct"], dtype=np.int64),
        conversions_control=np.asarray(columns["cc"], dtype=np.int64),
    )


@dataclass(frozen=True, eq=False)
class QiniCurve:
    values: np.ndarray
    baseline: np.ndarray
    n: int
    per_person: bool = False
    scaled: bool = False

    @property
    def bins(self) -> int:
        return int(self.values.shape[0])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"decile": np.arange(1, self.bins + 1), "qini": self.values, "random": self.baseline}
        )


def qini_curve(table: DecileTable, per_person: bool = False, scaled: bool = False) -> QiniCurve:
    values = np.cumsum(table.incremental)
    if per_person:
        values = values / table.n
    baseline = np.arange(1, table.bins + 1) / table.bins * values[-1]
    return QiniCurve(values=values, baseline=baseline, n=table.n, per_person=per_person, scaled=scaled)


def qini_coefficient(curve: QiniCurve) -> float:
    """Discrete area between the Qini curve and the random-targeting line."""
    area = float(np.sum(curve.values - curve.baseline))
    return area / curve.n if curve.scaled else area


def weighted_qini(values: Sequence[float] | np.ndarray, normalized: bool = False) -> float:
    """Decile-weighted Qini, weights 0.9 down to 0.1 for deciles 1..9 and 0 for decile 10."""
    values = np.asarray(values, dtype=float)
    if values.shape != (WEIGHTED_QINI_BINS,):
        raise EvaluationError(f"Weighted Qini needs exactly {WEIGHTED_QINI_BINS} curve values, got {values.size}.")
    weights = 1.0 - np.arange(1, WEIGHTED_QINI_BINS + 1) / WEIGHTED_QINI_BINS
    numerator = float(weights @ values)
    if not normalized:
        return numerator
    denominator = float(values.sum())
    if denominator == 0:
        raise EvaluationError("Normalized weighted Qini is undefined when the curve values sum to zero.")
    return numerator / denominator


def mean_qini(curve: QiniCurve) -> float:
    return float(np.mean(curve.values))


def top_decile_values(curve: QiniCurve, k: int = 3) -> list[float]:
    if not 1 <= k <= curve.bins:
        raise EvaluationError(f"k must lie in [1, {curve.bins}], got {k}.")
    return [float(value) for value in curve.values[:k]]


def qini_score(scores: np.ndarray, data: UpliftDataset, bins: int = 10, outcome: Target | str = Target.revenue) -> float:
    return qini_coefficient(qini_curve(decile_table(scores, data, bins=bins, outcome=outcome)))


@dataclass(frozen=True)
class SignificanceResult:
    statistic: float
    p_value: float
    dof: int


def conversion_significance(summary: UpliftSummary) -> SignificanceResult:
    """Pearson chi-squared test of conversion against group, without continuity correction."""
    table = np.array(
        [
            [summary.treatment.purchasers, summary.treatment.sessions - summary.treatment.purchasers],
            [summary.control.purchasers, summary.control.sessions - summary.control.purchasers],
        ],
        dtype=float,
    )
    if np.any(table < 0):
        raise EvaluationError("Purchasers cannot exceed sessions.")
    if np.any(table.sum(axis=0) == 0) or np.any(table.sum(axis=1) == 0):
        raise EvaluationError("Chi-squared test needs non-zero row and column totals.")
    statistic, p_value, dof, _ = chi2_contingency(table, correction=False)
    logger.debug("Chi-squared %.4f with p=%.3e", statistic, p_value)
    return SignificanceResult(statistic=float(statistic), p_value=float(p_value), dof=int(dof))
