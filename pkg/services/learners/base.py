from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

MODEL_FORMAT_VERSION = 1


class LearnerError(RuntimeError):
    """Raised when a learner cannot be fitted or applied to the given design."""


@dataclass(frozen=True)
class ConvergenceReport:
    iterations: int
    gradient_norm: float
    converged: bool


class ConvergenceError(LearnerError):
    """Raised when an iterative solver stops before meeting its tolerance."""

    def __init__(self, message: str, report: ConvergenceReport) -> None:
        super().__init__(message)
        self.report = report


class Regressor(Protocol):
    def predict(self, X: np.ndarray) -> np.ndarray: ...

    def to_dict(self) -> dict[str, object]: ...


class Classifier(Protocol):
    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...

    def to_dict(self) -> dict[str, object]: ...


def check_matrix(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise LearnerError(f"Design matrix must be 2-dimensional, got shape {X.shape}.")
    if X.shape[0] < 1:
        raise LearnerError("Design matrix has no rows.")
    if not np.all(np.isfinite(X)):
        raise LearnerError("Design matrix must contain finite entries only.")
    return X


def check_design(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = check_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise LearnerError(f"Target length {y.shape[0]} does not match {X.shape[0]} design rows.")
    if not np.all(np.isfinite(y)):
        raise LearnerError("Target must contain finite entries only.")
    return X, y


def check_binary(y: np.ndarray) -> np.ndarray:
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise LearnerError("Classification target must be 0/1.")
    return y


def check_width(X: np.ndarray, expected: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != expected:
        raise LearnerError(f"Expected {expected} columns, got shape {X.shape}.")
    return X
