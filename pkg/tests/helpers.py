from __future__ import annotations

import numpy as np

from services.dataset import UpliftDataset


def make_dataset(X, treatment, revenue, conversion=None) -> UpliftDataset:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    revenue = np.asarray(revenue, dtype=float)
    if conversion is None:
        conversion = (revenue > 0).astype(int)
    return UpliftDataset(
        covariates=X,
        treatment=np.asarray(treatment),
        conversion=np.asarray(conversion),
        revenue=revenue,
        feature_names=tuple(f"x{j + 1}" for j in range(X.shape[1])),
    )


def standard_error(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.std(ddof=1) / np.sqrt(values.size))


# Qini curve rows of two published models, one value per decile.
RDT_ROW = [1469.8, 1199.5, 1504.8, 1637.5, 1396.2, 1668.2, 1906.6, 1891.9, 1716.6, 1682.8]
ITM_ROW = [1034.2, 1618.0, 1430.7, 1637.6, 1468.0, 1279.8, 1397.2, 1436.4, 1512.4, 1682.8]
