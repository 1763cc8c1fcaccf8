from __future__ import annotations

import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit

from services.dataset import UpliftDataset

logger = logging.getLogger(__name__)


class SynthError(RuntimeError):
    """Raised when a generator spec or an oracle query is inconsistent."""


class GeneratorSpec(BaseModel):
    """Zero-inflated campaign: logistic purchase incidence times lognormal basket value.

    Treated customers add `b0 + b.x` to the purchase logit and `d0 + d.x` to the
    log basket value, so the revenue uplift at x has a closed form.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    n: int = Field(ge=1)
    p: int = Field(ge=1)
    treatment_share: float = Field(default=0.5, gt=0, lt=1)
    a0: float = 0.0
    a: list[float] | None = None
    b0: float = 0.0
    b: list[float] | None = None
    c0: float = 0.0
    c: list[float] | None = None
    d0: float = 0.0
    d: list[float] | None = None
    noise_sigma: float = Field(default=0.0, ge=0)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _weights_match_dimension(self) -> GeneratorSpec:
        for name in ("a", "b", "c", "d"):
            weights = getattr(self, name)
            if weights is None:
                object.__setattr__(self, name, [0.0] * self.p)
            elif len(weights) != self.p:
                raise ValueError(f"Weight vector {name} has length {len(weights)}, expected p={self.p}.")
        return self

    def weights(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f"x{j + 1}" for j in range(self.p))


def _linear_parts(spec: GeneratorSpec, X: np.ndarray) -> tuple[np.ndarray, ...]:
    purchase = spec.a0 + X @ spec.weights("a")
    purchase_lift = spec.b0 + X @ spec.weights("b")
    basket = spec.c0 + X @ spec.weights("c")
    basket_lift = spec.d0 + X @ spec.weights("d")
    return purchase, purchase_lift, basket, basket_lift


def generate(spec: GeneratorSpec) -> UpliftDataset:
    rng = np.random.default_rng(spec.seed)
    X = rng.standard_normal((spec.n, spec.p))
    treatment = (rng.random(spec.n) < spec.treatment_share).astype(np.int8)
    purchase, purchase_lift, basket, basket_lift = _linear_parts(spec, X)

    conversion = (rng.random(spec.n) < expit(purchase + treatment * purchase_lift)).astype(np.int8)
    noise = rng.normal(0.0, spec.noise_sigma, spec.n) if spec.noise_sigma > 0 else np.zeros(spec.n)
    revenue = np.where(conversion == 1, np.exp(basket + treatment * basket_lift + noise), 0.0)

    logger.debug("Generated %s synthetic sessions (seed=%s)", spec.n, spec.seed)
    return UpliftDataset(
        covariates=X,
        treatment=treatment,
        conversion=conversion,
        revenue=revenue,
        feature_names=spec.feature_names,
    )


def _as_matrix(spec: GeneratorSpec, x: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if X.shape[1] != spec.p:
        raise SynthError(f"Covariate vector has length {X.shape[1]}, expected p={spec.p}.")
    return X


def true_uplift_batch(spec: GeneratorSpec, X: np.ndarray) -> np.ndarray:
    X = _as_matrix(spec, X)
    purchase, purchase_lift, basket, basket_lift = _linear_parts(spec, X)
    lognormal_shift = spec.noise_sigma**2 / 2.0
    treated = expit(purchase + purchase_lift) * np.exp(basket + basket_lift + lognormal_shift)
    untreated = expit(purchase) * np.exp(basket + lognormal_shift)
    return treated - untreated


def true_uplift(spec: GeneratorSpec, x: np.ndarray) -> float:
    """Expected revenue with treatment minus without, at covariates x."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise SynthError("true_uplift expects a single covariate vector; use true_uplift_batch for matrices.")
    return float(true_uplift_batch(spec, x)[0])


def true_conversion_uplift(spec: GeneratorSpec, x: np.ndarray) -> np.ndarray:
    X = _as_matrix(spec, x)
    purchase, purchase_lift, _, _ = _linear_parts(spec, X)
    return expit(purchase + purchase_lift) - expit(purchase)
