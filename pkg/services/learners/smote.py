from __future__ import annotations

import logging

import numpy as np
from sklearn.neighbors import NearestNeighbors

from services.learners.base import LearnerError, check_binary, check_design
from services.learners.scaling import Standardizer

logger = logging.getLogger(__name__)


def minority_label(y: np.ndarray) -> int:
    positives = int(np.count_nonzero(y == 1))
    return 1 if positives <= y.shape[0] - positives else 0


def smote(
    X: np.ndarray,
    y: np.ndarray,
    k: int = 5,
    target_minority_count: int | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Append synthetic minority rows x + u*(neighbour - x), neighbour among the k nearest minority rows.

    Distances are measured on standardized columns; originals keep their order and
    synthetic rows follow them. Without a target the classes are balanced.
    """
    X, y = check_design(X, y)
    check_binary(y)
    label = minority_label(y)
    minority = np.flatnonzero(y == label)
    majority_count = y.shape[0] - minority.size
    target = majority_count if target_minority_count is None else int(target_minority_count)

    if minority.size < k + 1:
        raise LearnerError(f"SMOTE with k={k} needs at least {k + 1} minority rows, got {minority.size}.")
    if target < minority.size:
        raise LearnerError(f"Target minority count {target} is below the current {minority.size}.")
    n_new = target - minority.size
    if n_new == 0:
        return X.copy(), y.copy()

    X_min = X[minority]
    Z_min = Standardizer.fit(X).transform(X_min)
    neighbours = NearestNeighbors(n_neighbors=k + 1).fit(Z_min).kneighbors(Z_min, return_distance=False)
    # drop each row's own index (duplicates may return it at any position)
    own = neighbours == np.arange(minority.size)[:, None]
    has_own = own.any(axis=1)
    own[~has_own, -1] = True
    neighbours = neighbours[~own].reshape(minority.size, k)

    rng = np.random.default_rng(seed)
    origins = rng.integers(0, minority.size, size=n_new)
    partners = neighbours[origins, rng.integers(0, k, size=n_new)]
    gaps = rng.random(n_new)[:, None]
    synthetic = X_min[origins] + gaps * (X_min[partners] - X_min[origins])

    logger.debug("SMOTE added %s synthetic rows of class %s", n_new, label)
    return np.vstack([X, synthetic]), np.concatenate([y, np.full(n_new, float(label))])
