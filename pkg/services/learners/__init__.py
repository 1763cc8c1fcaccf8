from __future__ import annotations

from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from services.learners.base import (
    MODEL_FORMAT_VERSION,
    Classifier,
    ConvergenceError,
    ConvergenceReport,
    LearnerError,
    Regressor,
)
from services.learners.ert import ErtConfig, ErtEnsemble, TreeTask, fit_ert
from services.learners.lda import LdaModel, fit_lda
from services.learners.linear import LinearModel, fit_linear
from services.learners.logistic import LogisticModel, PenaltyKind, fit_logistic
from services.learners.smote import smote


class _LearnerSpecBase(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class OlsSpec(_LearnerSpecBase):
    id: Literal["ols"] = "ols"


class RidgeSpec(_LearnerSpecBase):
    id: Literal["ridge"] = "ridge"
    alpha: float = Field(default=1.0, ge=0)


class LogisticSpec(_LearnerSpecBase):
    id: Literal["logistic"] = "logistic"
    penalty: float = Field(default=1e-2, ge=0)
    penalty_kind: PenaltyKind = PenaltyKind.l2


class LdaSpec(_LearnerSpecBase):
    id: Literal["lda"] = "lda"


class ErtSpec(_LearnerSpecBase):
    id: Literal["ert"] = "ert"
    n_trees: int = Field(default=100, ge=1)
    max_features: int | None = Field(default=None, ge=1)
    min_samples_leaf: int = Field(default=20, ge=1)
    n_random_cuts: int = Field(default=5, ge=1)


LearnerSpec = Annotated[
    Union[OlsSpec, RidgeSpec, LogisticSpec, LdaSpec, ErtSpec],
    Field(discriminator="id"),
]

REGRESSOR_IDS = frozenset({"ols", "ridge", "ert"})
CLASSIFIER_IDS = frozenset({"logistic", "lda", "ert"})


def _ert_config(spec: ErtSpec, seed: int, n_jobs: int) -> ErtConfig:
    return ErtConfig(
        n_trees=spec.n_trees,
        max_features=spec.max_features,
        min_samples_leaf=spec.min_samples_leaf,
        n_random_cuts=spec.n_random_cuts,
        seed=seed,
        n_jobs=n_jobs,
    )


def build_regressor(spec: LearnerSpec, X: np.ndarray, y: np.ndarray, seed: int = 0, n_jobs: int = 1) -> Regressor:
    if isinstance(spec, OlsSpec):
        return fit_linear(X, y, alpha=0.0)
    if isinstance(spec, RidgeSpec):
        return fit_linear(X, y, alpha=spec.alpha)
    if isinstance(spec, ErtSpec):
        return fit_ert(X, y, _ert_config(spec, seed, n_jobs), task=TreeTask.regression)
    raise LearnerError(f"Learner {spec.id!r} cannot be used as a regressor.")


def build_classifier(spec: LearnerSpec, X: np.ndarray, y: np.ndarray, seed: int = 0, n_jobs: int = 1) -> Classifier:
    if isinstance(spec, LogisticSpec):
        return fit_logistic(X, y, penalty=spec.penalty, penalty_kind=spec.penalty_kind)
    if isinstance(spec, LdaSpec):
        return fit_lda(X, y)
    if isinstance(spec, ErtSpec):
        return fit_ert(X, y, _ert_config(spec, seed, n_jobs), task=TreeTask.classification)
    raise LearnerError(f"Learner {spec.id!r} cannot be used as a classifier.")


_LOADERS = {
    "linear": LinearModel.from_dict,
    "logistic": LogisticModel.from_dict,
    "lda": LdaModel.from_dict,
    "ert": ErtEnsemble.from_dict,
}


def load_model(payload: dict[str, object]) -> Regressor | Classifier:
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise LearnerError(f"Unsupported model format version {version!r}.")
    loader = _LOADERS.get(str(payload.get("kind")))
    if loader is None:
        raise LearnerError(f"Unknown model kind {payload.get('kind')!r}.")
    return loader(payload)


__all__ = [
    "CLASSIFIER_IDS",
    "REGRESSOR_IDS",
    "Classifier",
    "ConvergenceError",
    "ConvergenceReport",
    "ErtConfig",
    "ErtEnsemble",
    "ErtSpec",
    "LdaModel",
    "LdaSpec",
    "LearnerError",
    "LearnerSpec",
    "LinearModel",
    "LogisticModel",
    "LogisticSpec",
    "OlsSpec",
    "PenaltyKind",
    "Regressor",
    "RidgeSpec",
    "TreeTask",
    "build_classifier",
    "build_regressor",
    "fit_ert",
    "fit_lda",
    "fit_linear",
    "fit_logistic",
    "load_model",
    "smote",
]
