from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from services.dataset import GroupShares, UpliftDataset, group_shares

logger = logging.getLogger(__name__)


class Target(str, Enum):
    revenue = "revenue"
    conversion = "conversion"


class TransformError(RuntimeError):
    """Raised when a target or covariate transformation receives invalid input."""


@dataclass(frozen=True, eq=False)
class ContinuousTarget:
    values: np.ndarray
    shares: GroupShares


@dataclass(frozen=True, eq=False)
class BinaryTarget:
    values: np.ndarray
    threshold: float


@dataclass(frozen=True, eq=False)
class AugmentedMatrix:
    values: np.ndarray
    column_names: tuple[str, ...]


def crvtw(dataset: UpliftDataset, target: Target | str = Target.revenue) -> ContinuousTarget:
    """Signed, share-weighted outcome: +Y/q_T for treated buyers, -Y/q_C for control buyers, 0 otherwise.

    Its mean equals the difference in group mean outcomes.
    """
    shares = group_shares(dataset)
    if shares.n_t == 0 or shares.n_c == 0:
        raise TransformError("Both treatment and control groups must be non-empty.")
    y = dataset.outcome(Target(target).value)
    treated = dataset.treatment == 1
    values = np.where(treated, y / shares.q_t, -y / shares.q_c)
    values = np.where(y > 0, values, 0.0)
    return ContinuousTarget(values=values, shares=shares)


def discretize(values: np.ndarray, threshold: float) -> BinaryTarget:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)) or not np.isfinite(threshold):
        raise TransformError("Discretization requires finite values and threshold.")
    return BinaryTarget(values=(values > threshold).astype(np.int8), threshold=float(threshold))


def rdt(dataset: UpliftDataset, target: Target | str = Target.revenue) -> BinaryTarget:
    """1 for treated buyers, 0 for control buyers and every non-buyer."""
    return discretize(crvtw(dataset, target).values, 0.0)


def itm_design(X: np.ndarray, treatment: np.ndarray | int) -> np.ndarray:
    """Columns [X, T, X*T] for an array of covariates and a flag vector or a forced flag."""
    X = np.asarray(X, dtype=float)
    t = np.broadcast_to(np.asarray(treatment, dtype=float), (X.shape[0],))
    return np.hstack([X, t[:, None], X * t[:, None]])


def itm_augment(dataset: UpliftDataset, force_treatment: int | None = None) -> AugmentedMatrix:
    if force_treatment is None:
        treatment: np.ndarray | int = dataset.treatment
    elif force_treatment in (0, 1):
        treatment = int(force_treatment)
    else:
        raise TransformError(f"force_treatment must be 0 or 1, got {force_treatment!r}.")
    names = (
        *dataset.feature_names,
        "treatment",
        *(f"{name}_x_treatment" for name in dataset.feature_names),
    )
    return AugmentedMatrix(values=itm_design(dataset.covariates, treatment), column_names=names)
