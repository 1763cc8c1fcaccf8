from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from services.learners.base import MODEL_FORMAT_VERSION, LearnerError, check_design, check_width
from services.learners.scaling import Standardizer

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Ridge regression fitted on standardized columns; alpha=0 is ordinary least squares.

    `weights` and `bias` live in the standardized space where the penalty applies;
    `coefficients` and `intercept` are the same model in the caller's units.
    """

    weights: np.ndarray
    bias: float
    alpha: float
    scaler: Standardizer

    @property
    def coefficients(self) -> np.ndarray:
        return self.weights / self.scaler.scale

    @property
    def intercept(self) -> float:
        return float(self.bias - np.dot(self.coefficients, self.scaler.mean))

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = check_width(X, self.weights.shape[0])
        return self.scaler.transform(X) @ self.weights + self.bias

    def to_dict(self) -> dict[str, object]:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "linear",
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "alpha": self.alpha,
            "scaler": self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict[str, object]) -> LinearModel:
        return cls(
            weights=np.asarray(payload["weights"], dtype=float),
            bias=float(payload["bias"]),  # type: ignore[arg-type]
            alpha=float(payload["alpha"]),  # type: ignore[arg-type]
            scaler=Standardizer.from_dict(payload["scaler"]),  # type: ignore[arg-type]
        )


def _solve_normal_equations(gram: np.ndarray, rhs: np.ndarray, Z: np.ndarray, yc: np.ndarray) -> np.ndarray:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            return linalg.solve(gram, rhs, assume_a="pos")
    except (linalg.LinAlgError, linalg.LinAlgWarning):
        logger.warning("Normal equations are singular; using the minimum-norm least-squares solution")
    solution, *_ = linalg.lstsq(Z, yc)
    return solution


def fit_linear(X: np.ndarray, y: np.ndarray, alpha: float = 0.0, standardize: bool = True) -> LinearModel:
    """Minimize ||y - Xw - b||^2 + alpha*||w||^2 with an unpenalized intercept."""
    if alpha < 0:
        raise LearnerError(f"Ridge penalty must be non-negative, got {alpha}.")
    X, y = check_design(X, y)
    scaler = Standardizer.fit(X) if standardize else Standardizer.identity(X.shape[1])
    Z = scaler.transform(X)

    # centring makes the unpenalized intercept separable from the weights
    z_mean = Z.mean(axis=0)
    y_mean = float(y.mean())
    Zc = Z - z_mean
    yc = y - y_mean
    gram = Zc.T @ Zc + alpha * np.eye(Z.shape[1])
    if alpha == 0:
        weights = _solve_normal_equations(gram, Zc.T @ yc, Zc, yc)
    else:
        weights = linalg.solve(gram, Zc.T @ yc, assume_a="pos")
    bias = y_mean - float(z_mean @ weights)
    return LinearModel(weights=weights, bias=bias, alpha=float(alpha), scaler=scaler)


def ridge_objective_gradient(model: LinearModel, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the penalized squared error w.r.t. (weights, bias) in standardized space."""
    Z = model.scaler.transform(X)
    residual = Z @ model.weights + model.bias - np.asarray(y, dtype=float)
    grad_w = 2.0 * (Z.T @ residual + model.alpha * model.weights)
    grad_b = 2.0 * residual.sum()
    return np.append(grad_w, grad_b)
