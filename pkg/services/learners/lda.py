from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import expit

from services.learners.base import MODEL_FORMAT_VERSION, LearnerError, check_binary, check_design, check_width
from services.learners.scaling import Standardizer

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LdaModel:
    """Two-class Gaussian discriminant with a shared covariance (no shrinkage)."""

    means: np.ndarray
    covariance: np.ndarray
    priors: np.ndarray
    ridge: float
    scaler: Standardizer

    def __post_init__(self) -> None:
        factor = linalg.cho_factor(self.covariance, lower=True)
        direction = linalg.cho_solve(factor, self.means[1] - self.means[0])
        offset = -0.5 * float((self.means[1] + self.means[0]) @ direction) + float(
            np.log(self.priors[1] / self.priors[0])
        )
        object.__setattr__(self, "_direction", direction)
        object.__setattr__(self, "_offset", offset)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = check_width(X, self.means.shape[1])
        return self.scaler.transform(X) @ self._direction + self._offset  # type: ignore[attr-defined]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(X))

    def to_dict(self) -> dict[str, object]:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "lda",
            "means": self.means.tolist(),
            "covariance": self.covariance.tolist(),
            "priors": self.priors.tolist(),
            "ridge": self.ridge,
            "scaler": self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict[str, object]) -> LdaModel:
        return cls(
            means=np.asarray(payload["means"], dtype=float),
            covariance=np.asarray(payload["covariance"], dtype=float),
            priors=np.asarray(payload["priors"], dtype=float),
            ridge=float(payload["ridge"]),  # type: ignore[arg-type]
            scaler=Standardizer.from_dict(payload["scaler"]),  # type: ignore[arg-type]
        )


def _is_positive_definite(matrix: np.ndarray) -> bool:
    try:
        linalg.cho_factor(matrix, lower=True)
    except linalg.LinAlgError:
        return False
    return bool(np.linalg.cond(matrix) < 1e12)


def fit_lda(X: np.ndarray, y: np.ndarray, standardize: bool = True) -> LdaModel:
    X, y = check_design(X, y)
    check_binary(y)
    counts = np.array([np.count_nonzero(y == 0), np.count_nonzero(y == 1)])
    if counts.min() < 2:
        raise LearnerError(f"LDA needs at least 2 rows per class, got {counts.tolist()}.")

    scaler = Standardizer.fit(X) if standardize else Standardizer.identity(X.shape[1])
    Z = scaler.transform(X)
    groups = (Z[y == 0], Z[y == 1])
    means = np.vstack([group.mean(axis=0) for group in groups])
    scatter = sum((group - mean).T @ (group - mean) for group, mean in zip(groups, means, strict=True))
    covariance = np.atleast_2d(scatter / max(len(y) - 2, 1))
    covariance = 0.5 * (covariance + covariance.T)

    ridge = 0.0
    if not _is_positive_definite(covariance):
        m = covariance.shape[0]
        trace = float(np.trace(covariance))
        ridge = 1e-8 * trace / m if trace > 0 else 1e-8
        covariance = covariance + ridge * np.eye(m)
        logger.debug("Pooled covariance is singular; added %.3e to the diagonal", ridge)

    return LdaModel(
        means=means,
        covariance=covariance,
        priors=counts / counts.sum(),
        ridge=ridge,
        scaler=scaler,
    )
