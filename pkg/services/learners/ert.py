from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field

from services.learners.base import MODEL_FORMAT_VERSION, LearnerError, check_binary, check_design, check_width

logger = logging.getLogger(__name__)

LEAF = -1


class TreeTask(str, Enum):
    regression = "regression"
    classification = "classification"


class ErtConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_trees: int = Field(default=100, ge=1)
    max_features: int | None = Field(default=None, ge=1, description="Defaults to round(sqrt(m)).")
    min_samples_leaf: int = Field(default=20, ge=1)
    n_random_cuts: int = Field(default=5, ge=1)
    seed: int = Field(default=0, ge=0)
    n_jobs: int = Field(default=1, ge=1)


@dataclass(frozen=True, eq=False)
class RandomizedTree:
    """Array-encoded binary tree; `feature[i] == -1` marks a leaf holding `value[i]`."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    samples: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while np.any(active):
            rows = np.flatnonzero(active)
            current = node[rows]
            goes_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(goes_left, self.left[current], self.right[current])
            active[rows] = self.feature[node[rows]] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict[str, list]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "samples": self.samples.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict[str, list]) -> RandomizedTree:
        return cls(
            feature=np.asarray(payload["feature"], dtype=np.int64),
            threshold=np.asarray(payload["threshold"], dtype=float),
            left=np.asarray(payload["left"], dtype=np.int64),
            right=np.asarray(payload["right"], dtype=np.int64),
            value=np.asarray(payload["value"], dtype=float),
            samples=np.asarray(payload["samples"], dtype=np.int64),
        )


@dataclass(frozen=True, eq=False)
class ErtEnsemble:
    trees: tuple[RandomizedTree, ...]
    task: TreeTask
    config: ErtConfig
    n_features: int

    def _average(self, X: np.ndarray) -> np.ndarray:
        X = check_width(X, self.n_features)
        return np.mean([tree.predict(X) for tree in self.trees], axis=0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self._average(X)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.task is not TreeTask.classification:
            raise LearnerError("predict_proba is only available for classification ensembles.")
        return self._average(X)

    def to_dict(self) -> dict[str, object]:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "ert",
            "task": self.task.value,
            "config": self.config.model_dump(),
            "n_features": self.n_features,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: dict[str, object]) -> ErtEnsemble:
        return cls(
            trees=tuple(RandomizedTree.from_dict(tree) for tree in payload["trees"]),  # type: ignore[union-attr]
            task=TreeTask(payload["task"]),
            config=ErtConfig.model_validate(payload["config"]),
            n_features=int(payload["n_features"]),  # type: ignore[arg-type]
        )


def _split_gain(x: np.ndarray, y: np.ndarray, cuts: np.ndarray, task: TreeTask, min_leaf: int) -> np.ndarray:
    """Impurity decrease (times node size) of every cut; -inf where a child is too small."""
    goes_left = x[:, None] <= cuts[None, :]
    n = y.shape[0]
    n_left = goes_left.sum(axis=0).astype(float)
    n_right = n - n_left
    sum_left = y @ goes_left
    sum_right = y.sum() - sum_left
    if task is TreeTask.regression:
        sq_left = (y * y) @ goes_left
        sq_right = (y * y).sum() - sq_left
        with np.errstate(divide="ignore", invalid="ignore"):
            child = (sq_left - sum_left**2 / n_left) + (sq_right - sum_right**2 / n_right)
        parent = (y * y).sum() - y.sum() ** 2 / n
    else:
        # binary Gini impurity scaled by node size: 2*s*(n-s)/n
        with np.errstate(divide="ignore", invalid="ignore"):
            child = 2 * sum_left * (n_left - sum_left) / n_left + 2 * sum_right * (n_right - sum_right) / n_right
        parent = 2 * y.sum() * (n - y.sum()) / n
    gain = parent - child
    valid = (n_left >= min_leaf) & (n_right >= min_leaf)
    return np.where(valid, gain, -np.inf)


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    task: TreeTask,
    max_features: int,
    min_leaf: int,
    n_cuts: int,
    seed: np.random.SeedSequence,
) -> RandomizedTree:
    rng = np.random.default_rng(seed)
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    samples: list[int] = []

    def new_node(rows: np.ndarray) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        y_rows = y[rows]
        # pure nodes store their exact value
        value.append(float(y_rows[0]) if np.all(y_rows == y_rows[0]) else float(y_rows.mean()))
        samples.append(int(rows.size))
        return len(feature) - 1

    stack = [(new_node(np.arange(X.shape[0])), np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if rows.size < 2 * min_leaf:
            continue
        y_node = y[rows]
        if np.all(y_node == y_node[0]):
            continue

        best_gain, best_feature, best_cut = 0.0, LEAF, 0.0
        for j in rng.choice(X.shape[1], size=max_features, replace=False):
            x = X[rows, j]
            lo, hi = float(x.min()), float(x.max())
            if lo == hi:
                continue
            cuts = rng.uniform(lo, hi, size=n_cuts)
            gains = _split_gain(x, y_node, cuts, task, min_leaf)
            k = int(np.argmax(gains))
            if gains[k] > best_gain:
                best_gain, best_feature, best_cut = float(gains[k]), int(j), float(cuts[k])
        if best_feature == LEAF:
            continue

        goes_left = X[rows, best_feature] <= best_cut
        left_node = new_node(rows[goes_left])
        right_node = new_node(rows[~goes_left])
        feature[node], threshold[node] = best_feature, best_cut
        left[node], right[node] = left_node, right_node
        stack.append((right_node, rows[~goes_left]))
        stack.append((left_node, rows[goes_left]))

    return RandomizedTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
        samples=np.asarray(samples, dtype=np.int64),
    )


def fit_ert(X: np.ndarray, y: np.ndarray, config: ErtConfig | None = None, task: TreeTask | str = TreeTask.regression) -> ErtEnsemble:
    """Extremely randomized trees grown on the full sample (no bootstrap).

    Each node draws `max_features` features without replacement and `n_random_cuts`
    uniform thresholds per feature between the node-local min and max, keeping the
    cut with the largest variance (regression) or Gini (classification) decrease.
    Per-tree seeds are spawned from the master seed, so results do not depend on `n_jobs`.
    """
    config = config or ErtConfig()
    task = TreeTask(task)
    X, y = check_design(X, y)
    if task is TreeTask.classification:
        check_binary(y)
    m = X.shape[1]
    max_features = config.max_features or max(1, round(math.sqrt(m)))
    if max_features > m:
        raise LearnerError(f"max_features={max_features} exceeds the {m} available features.")

    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees = Parallel(n_jobs=config.n_jobs, prefer="threads")(
        delayed(_grow_tree)(X, y, task, max_features, config.min_samples_leaf, config.n_random_cuts, seed)
        for seed in seeds
    )
    logger.debug("Grew %s extremely randomized trees (%s)", config.n_trees, task.value)
    return ErtEnsemble(trees=tuple(trees), task=task, config=config, n_features=m)
