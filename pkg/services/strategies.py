from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from services.dataset import GroupShares, UpliftDataset, group_shares
from services.learners import (
    CLASSIFIER_IDS,
    MODEL_FORMAT_VERSION,
    REGRESSOR_IDS,
    Classifier,
    ErtSpec,
    LdaSpec,
    LearnerSpec,
    LogisticSpec,
    OlsSpec,
    Regressor,
    RidgeSpec,
    build_classifier,
    build_regressor,
    load_model,
    smote,
)
from services.transforms import Target, crvtw, itm_design, rdt

logger = logging.getLogger(__name__)


class StrategyError(RuntimeError):
    """Raised when an uplift strategy cannot be fitted or scored."""


class StrategyKind(str, Enum):
    rdt = "RDT"
    crvtw = "CRVTW"
    itm = "ITM"
    indirect = "INDIRECT"
    response = "RESPONSE"


class Stage(str, Enum):
    one_stage = "one_stage"
    two_stage = "two_stage"
    two_stage_smote = "two_stage_smote"


class SecondStageTarget(str, Enum):
    transformed = "transformed"
    revenue = "revenue"


class SmoteOptions(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    k: int = Field(default=5, ge=1)
    minority_ratio: float = Field(default=1.0, gt=0, le=1, description="Target minority size as a share of the majority.")


class StrategySpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: StrategyKind
    stage: Stage = Stage.one_stage
    classifier: LearnerSpec | None = None
    regressor: LearnerSpec | None = None
    target: Target = Target.revenue
    smote: SmoteOptions = SmoteOptions()
    crvtw_second_stage: SecondStageTarget = SecondStageTarget.transformed

    @model_validator(mode="after")
    def _learners_match_stage(self) -> StrategySpec:
        needs_classifier = self.kind is StrategyKind.rdt or self.stage is not Stage.one_stage
        needs_regressor = self.kind is not StrategyKind.rdt or self.stage is Stage.two_stage
        if self.stage is Stage.two_stage_smote:
            if self.kind is not StrategyKind.rdt:
                raise ValueError("two_stage_smote is only defined for RDT.")
            needs_regressor = False
        if needs_classifier and self.classifier is None:
            raise ValueError(f"{self.kind.value} {self.stage.value} requires a classifier.")
        if needs_regressor and self.regressor is None:
            raise ValueError(f"{self.kind.value} {self.stage.value} requires a regressor.")
        if not needs_classifier and self.classifier is not None:
            raise ValueError(f"{self.kind.value} {self.stage.value} takes no classifier.")
        if not needs_regressor and self.regressor is not None:
            raise ValueError(f"{self.kind.value} {self.stage.value} takes no regressor.")
        if self.classifier is not None and self.classifier.id not in CLASSIFIER_IDS:
            raise ValueError(f"Learner {self.classifier.id!r} is not a classifier.")
        if self.regressor is not None and self.regressor.id not in REGRESSOR_IDS:
            raise ValueError(f"Learner {self.regressor.id!r} is not a regressor.")
        if self.target is Target.conversion and self.stage is not Stage.one_stage:
            raise ValueError("Conversion targets are modelled with one-stage strategies only.")
        return self

    @property
    def label(self) -> str:
        learners = ", ".join(
            _learner_label(spec) for spec in (self.classifier, self.regressor) if spec is not None
        )
        return f"{self.kind.value} {self.stage.value} ({learners})"


def _learner_label(spec: LearnerSpec) -> str:
    params = spec.model_dump(mode="json", exclude={"id"}, exclude_none=True)
    if not params:
        return spec.id
    return spec.id + "[" + ", ".join(f"{key}={value}" for key, value in params.items()) + "]"


class Scorer(Protocol):
    def score(self, data: UpliftDataset) -> np.ndarray: ...


Component = Regressor | Classifier


@dataclass(frozen=True, eq=False)
class FittedStrategy:
    spec: StrategySpec
    components: Mapping[str, Component]
    shares: GroupShares
    n_features: int

    def score_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise StrategyError(f"Expected {self.n_features} covariates, got shape {X.shape}.")
        kind, stage = self.spec.kind, self.spec.stage
        if kind is StrategyKind.rdt:
            propensity = self.components["classifier"].predict_proba(X)  # type: ignore[union-attr]
            if stage is Stage.two_stage:
                return propensity * self.components["regressor"].predict(X)  # type: ignore[union-attr]
            return propensity
        if kind is StrategyKind.itm:
            regressor = self.components["regressor"]
            uplift = regressor.predict(itm_design(X, 1)) - regressor.predict(itm_design(X, 0))  # type: ignore[union-attr]
            return self._incidence(X) * uplift
        if kind is StrategyKind.indirect:
            return self._hurdle(X, "_treatment") - self._hurdle(X, "_control")
        return self._hurdle(X, "")

    def _incidence(self, X: np.ndarray, suffix: str = "") -> np.ndarray | float:
        classifier = self.components.get(f"classifier{suffix}")
        return 1.0 if classifier is None else classifier.predict_proba(X)  # type: ignore[union-attr]

    def _hurdle(self, X: np.ndarray, suffix: str) -> np.ndarray:
        return self._incidence(X, suffix) * self.components[f"regressor{suffix}"].predict(X)  # type: ignore[union-attr]

    def score(self, data: UpliftDataset) -> np.ndarray:
        return self.score_matrix(data.covariates)

    def to_dict(self) -> dict[str, object]:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "spec": self.spec.model_dump(mode="json"),
            "shares": {"n_t": self.shares.n_t, "n_c": self.shares.n_c},
            "n_features": self.n_features,
            "components": {name: model.to_dict() for name, model in self.components.items()},
        }


def load_strategy(payload: dict[str, object]) -> FittedStrategy:
    if not isinstance(payload, dict):
        raise StrategyError("A strategy document must be a JSON object.")
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise StrategyError(f"Unsupported strategy format version {payload.get('format_version')!r}.")
    try:
        components = payload["components"]
        return FittedStrategy(
            spec=StrategySpec.model_validate(payload["spec"]),
            components={name: load_model(model) for name, model in components.items()},  # type: ignore[union-attr]
            shares=GroupShares(**payload["shares"]),  # type: ignore[arg-type]
            n_features=int(payload["n_features"]),  # type: ignore[arg-type]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StrategyError(f"Malformed strategy document: {exc}") from exc


def _component_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _require_rows(mask: np.ndarray, what: str) -> np.ndarray:
    if not np.any(mask):
        raise StrategyError(f"No {what} in the training data.")
    return mask


class _Fitter:
    def __init__(self, spec: StrategySpec, seed: int, n_jobs: int) -> None:
        self._spec = spec
        self._seed = seed
        self._n_jobs = n_jobs
        self._calls = 0

    def next_seed(self) -> int:
        self._calls += 1
        return _component_seed(self._seed, self._calls)

    def regressor(self, X: np.ndarray, y: np.ndarray) -> Regressor:
        assert self._spec.regressor is not None
        return build_regressor(self._spec.regressor, X, y, seed=self.next_seed(), n_jobs=self._n_jobs)

    def classifier(self, X: np.ndarray, y: np.ndarray) -> Classifier:
        assert self._spec.classifier is not None
        return build_classifier(self._spec.classifier, X, y, seed=self.next_seed(), n_jobs=self._n_jobs)

    def hurdle(self, X: np.ndarray, y: np.ndarray, suffix: str, who: str) -> dict[str, Component]:
        """Purchase classifier times buyer-level regressor when two-stage; plain regressor otherwise."""
        if self._spec.stage is Stage.one_stage:
            return {f"regressor{suffix}": self.regressor(X, y)}
        buyers = _require_rows(y > 0, f"buyers among {who}")
        return {
            f"classifier{suffix}": self.classifier(X, buyers.astype(float)),
            f"regressor{suffix}": self.regressor(X[buyers], y[buyers]),
        }


def fit_strategy(spec: StrategySpec, train: UpliftDataset, seed: int = 0, n_jobs: int = 1) -> FittedStrategy:
    X = train.covariates
    t = train.treatment
    y = train.outcome(spec.target.value)
    fitter = _Fitter(spec, seed, n_jobs)
    components: dict[str, Component] = {}

    if spec.kind is StrategyKind.rdt:
        z = rdt(train, spec.target).values.astype(float)
        if spec.stage is Stage.two_stage_smote:
            minority = min(np.count_nonzero(z == 1), np.count_nonzero(z == 0))
            majority = z.shape[0] - minority
            target_count = max(minority, round(spec.smote.minority_ratio * majority))
            X_res, z_res = smote(X, z, k=spec.smote.k, target_minority_count=target_count, seed=fitter.next_seed())
            components["classifier"] = fitter.classifier(X_res, z_res)
        else:
            components["classifier"] = fitter.classifier(X, z)
        if spec.stage is Stage.two_stage:
            buyers = _require_rows(y > 0, "buyers")
            components["regressor"] = fitter.regressor(X[buyers], y[buyers])

    elif spec.kind is StrategyKind.crvtw:
        z = crvtw(train, spec.target).values
        if spec.stage is Stage.one_stage:
            components["regressor"] = fitter.regressor(X, z)
        else:
            buyers = _require_rows(y > 0, "buyers")
            second = z if spec.crvtw_second_stage is SecondStageTarget.transformed else y
            components["classifier"] = fitter.classifier(X, buyers.astype(float))
            components["regressor"] = fitter.regressor(X[buyers], second[buyers])

    elif spec.kind is StrategyKind.itm:
        design = itm_design(X, t)
        if spec.stage is Stage.one_stage:
            components["regressor"] = fitter.regressor(design, y)
        else:
            buyers = _require_rows(y > 0, "buyers")
            components["classifier"] = fitter.classifier(X, buyers.astype(float))
            components["regressor"] = fitter.regressor(design[buyers], y[buyers])

    elif spec.kind is StrategyKind.indirect:
        for flag, suffix, who in ((1, "_treatment", "treated customers"), (0, "_control", "control customers")):
            rows = _require_rows(t == flag, who)
            components.update(fitter.hurdle(X[rows], y[rows], suffix, who))

    else:
        rows = _require_rows(t == 1, "treated customers")
        components.update(fitter.hurdle(X[rows], y[rows], "", "treated customers"))

    logger.debug("Fitted %s on %s records", spec.label, train.n)
    return FittedStrategy(spec=spec, components=components, shares=group_shares(train), n_features=train.p)


def score(model: Scorer, data: UpliftDataset) -> np.ndarray:
    scores = np.asarray(model.score(data), dtype=float)
    if scores.shape != (data.n,) or not np.all(np.isfinite(scores)):
        raise StrategyError("Scores must be one finite value per record.")
    return scores


RIDGE_ALPHAS = (0.01, 1.0, 100.0)
LOGISTIC_PENALTIES = (1e-4, 1e-2, 1.0)
ERT_LEAF_SIZES = (10, 50)


def default_classifiers() -> list[LearnerSpec]:
    return [
        *(LogisticSpec(penalty=penalty) for penalty in LOGISTIC_PENALTIES),
        LdaSpec(),
        *(ErtSpec(min_samples_leaf=leaf) for leaf in ERT_LEAF_SIZES),
    ]


def default_regressors() -> list[LearnerSpec]:
    return [
        OlsSpec(),
        *(RidgeSpec(alpha=alpha) for alpha in RIDGE_ALPHAS),
        *(ErtSpec(min_samples_leaf=leaf) for leaf in ERT_LEAF_SIZES),
    ]


def default_grid(kind: StrategyKind | str, stage: Stage | str = Stage.one_stage) -> list[StrategySpec]:
    """Desk-scale hyperparameter grid; two-stage variants pair each linear classifier with OLS."""
    kind, stage = StrategyKind(kind), Stage(stage)
    if stage is Stage.one_stage:
        if kind is StrategyKind.rdt:
            return [StrategySpec(kind=kind, classifier=spec) for spec in default_classifiers()]
        return [StrategySpec(kind=kind, regressor=spec) for spec in default_regressors()]
    linear_classifiers = [*(LogisticSpec(penalty=penalty) for penalty in LOGISTIC_PENALTIES), LdaSpec()]
    if stage is Stage.two_stage_smote:
        return [StrategySpec(kind=kind, stage=stage, classifier=spec) for spec in linear_classifiers]
    return [
        StrategySpec(kind=kind, stage=stage, classifier=spec, regressor=OlsSpec()) for spec in linear_classifiers
    ]
