from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg
from scipy.special import expit

from services.learners.base import (
    MODEL_FORMAT_VERSION,
    ConvergenceError,
    ConvergenceReport,
    LearnerError,
    check_binary,
    check_design,
    check_width,
)
from services.learners.scaling import Standardizer

logger = logging.getLogger(__name__)


class PenaltyKind(str, Enum):
    l1 = "l1"
    l2 = "l2"


@dataclass(frozen=True, eq=False)
class LogisticModel:
    weights: np.ndarray
    bias: float
    penalty: float
    penalty_kind: PenaltyKind
    scaler: Standardizer
    report: ConvergenceReport

    @property
    def coefficients(self) -> np.ndarray:
        return self.weights / self.scaler.scale

    @property
    def intercept(self) -> float:
        return float(self.bias - np.dot(self.coefficients, self.scaler.mean))

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = check_width(X, self.weights.shape[0])
        return self.scaler.transform(X) @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(X))

    def to_dict(self) -> dict[str, object]:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "logistic",
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "penalty": self.penalty,
            "penalty_kind": self.penalty_kind.value,
            "scaler": self.scaler.to_dict(),
            "report": {
                "iterations": self.report.iterations,
                "gradient_norm": self.report.gradient_norm,
                "converged": self.report.converged,
            },
        }

    @classmethod
    def from_dict(cls, payload: dict[str, object]) -> LogisticModel:
        report = payload["report"]
        return cls(
            weights=np.asarray(payload["weights"], dtype=float),
            bias=float(payload["bias"]),  # type: ignore[arg-type]
            penalty=float(payload["penalty"]),  # type: ignore[arg-type]
            penalty_kind=PenaltyKind(payload["penalty_kind"]),
            scaler=Standardizer.from_dict(payload["scaler"]),  # type: ignore[arg-type]
            report=ConvergenceReport(**report),  # type: ignore[arg-type]
        )


def _with_intercept(Z: np.ndarray) -> np.ndarray:
    return np.hstack([Z, np.ones((Z.shape[0], 1))])


def logistic_objective(theta: np.ndarray, Za: np.ndarray, y: np.ndarray, penalty: float) -> float:
    """Mean Bernoulli negative log-likelihood plus (penalty/2)*||w||^2; theta = (w, b)."""
    eta = Za @ theta
    nll = float(np.mean(np.logaddexp(0.0, eta) - y * eta))
    return nll + 0.5 * penalty * float(theta[:-1] @ theta[:-1])


def logistic_gradient(theta: np.ndarray, Za: np.ndarray, y: np.ndarray, penalty: float) -> np.ndarray:
    grad = Za.T @ (expit(Za @ theta) - y) / Za.shape[0]
    grad[:-1] += penalty * theta[:-1]
    return grad


def _newton_step(theta: np.ndarray, Za: np.ndarray, grad: np.ndarray, penalty: float) -> np.ndarray:
    p = expit(Za @ theta)
    hessian = (Za.T * (p * (1.0 - p))) @ Za / Za.shape[0]
    hessian[np.diag_indices(Za.shape[1] - 1)] += penalty
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            return linalg.solve(hessian, grad, assume_a="pos")
    except (linalg.LinAlgError, linalg.LinAlgWarning):
        step, *_ = linalg.lstsq(hessian, grad)
        return step


def _fit_l2(Za: np.ndarray, y: np.ndarray, penalty: float, tol: float, max_iter: int) -> tuple[np.ndarray, ConvergenceReport]:
    theta = np.zeros(Za.shape[1])
    objective = logistic_objective(theta, Za, y, penalty)
    grad_norm = float("inf")
    for iteration in range(max_iter + 1):
        grad = logistic_gradient(theta, Za, y, penalty)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            return theta, ConvergenceReport(iterations=iteration, gradient_norm=grad_norm, converged=True)
        if iteration == max_iter:
            break
        step = _newton_step(theta, Za, grad, penalty)
        slope = float(grad @ step)
        scale = 1.0
        while scale > 1e-12:
            candidate = theta - scale * step
            candidate_objective = logistic_objective(candidate, Za, y, penalty)
            if candidate_objective <= objective - 1e-4 * scale * slope:
                break
            scale *= 0.5
        theta, objective = candidate, candidate_objective
    return theta, ConvergenceReport(iterations=max_iter, gradient_norm=grad_norm, converged=False)


def _soft_threshold(values: np.ndarray, level: float) -> np.ndarray:
    return np.sign(values) * np.maximum(np.abs(values) - level, 0.0)


def _fit_l1(Za: np.ndarray, y: np.ndarray, penalty: float, tol: float, max_iter: int) -> tuple[np.ndarray, ConvergenceReport]:
    """Accelerated proximal gradient with adaptive restart; convergence on the gradient-mapping norm."""
    lipschitz = 0.25 * float(np.linalg.norm(Za, ord=2)) ** 2 / Za.shape[0]
    step = 1.0 / max(lipschitz, 1e-12)

    def prox(theta: np.ndarray) -> np.ndarray:
        out = theta.copy()
        out[:-1] = _soft_threshold(theta[:-1], step * penalty)
        return out

    def composite(theta: np.ndarray) -> float:
        return logistic_objective(theta, Za, y, 0.0) + penalty * float(np.abs(theta[:-1]).sum())

    theta = np.zeros(Za.shape[1])
    momentum_point = theta.copy()
    t = 1.0
    previous = composite(theta)
    mapping_norm = float("inf")
    for iteration in range(1, max_iter + 1):
        grad = logistic_gradient(momentum_point, Za, y, 0.0)
        updated = prox(momentum_point - step * grad)
        mapping_norm = float(np.linalg.norm(momentum_point - updated)) / step
        current = composite(updated)
        if current > previous:
            # restart momentum from the last accepted iterate
            momentum_point, t = theta.copy(), 1.0
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        momentum_point = updated + ((t - 1.0) / t_next) * (updated - theta)
        theta, t, previous = updated, t_next, current
        if mapping_norm <= tol:
            return theta, ConvergenceReport(iterations=iteration, gradient_norm=mapping_norm, converged=True)
    return theta, ConvergenceReport(iterations=max_iter, gradient_norm=mapping_norm, converged=False)


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    penalty: float = 1e-2,
    penalty_kind: PenaltyKind | str = PenaltyKind.l2,
    tol: float = 1e-6,
    max_iter: int | None = None,
    standardize: bool = True,
) -> LogisticModel:
    """Penalized logistic regression: Newton with backtracking for L2, proximal gradient for L1.

    The intercept is never penalized.
    """
    if penalty < 0:
        raise LearnerError(f"Penalty must be non-negative, got {penalty}.")
    kind = PenaltyKind(penalty_kind)
    X, y = check_design(X, y)
    check_binary(y)
    scaler = Standardizer.fit(X) if standardize else Standardizer.identity(X.shape[1])
    Za = _with_intercept(scaler.transform(X))

    if kind is PenaltyKind.l2:
        theta, report = _fit_l2(Za, y, penalty, tol, max_iter or 100)
    else:
        theta, report = _fit_l1(Za, y, penalty, tol, max_iter or 20000)
    logger.debug("Logistic %s fit: %s iterations, gradient norm %.3e", kind.value, report.iterations, report.gradient_norm)
    if not report.converged:
        raise ConvergenceError(
            f"Logistic regression ({kind.value}, penalty={penalty}) did not converge in "
            f"{report.iterations} iterations (gradient norm {report.gradient_norm:.3e}).",
            report,
        )
    return LogisticModel(
        weights=theta[:-1],
        bias=float(theta[-1]),
        penalty=float(penalty),
        penalty_kind=kind,
        scaler=scaler,
        report=report,
    )
