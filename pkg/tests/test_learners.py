from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.linear_model import LogisticRegression, Ridge

from services.learners import (
    ConvergenceError,
    ErtConfig,
    ErtSpec,
    LdaSpec,
    LearnerError,
    LogisticSpec,
    OlsSpec,
    RidgeSpec,
    build_classifier,
    build_regressor,
    fit_ert,
    fit_lda,
    fit_linear,
    fit_logistic,
    load_model,
    smote,
)
from services.learners.linear import ridge_objective_gradient
from services.learners.logistic import PenaltyKind, logistic_gradient, logistic_objective
from services.learners.smote import minority_label


def _classification_data(seed: int, n: int = 400, m: int = 3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, m))
    logits = X @ rng.normal(size=m) - 0.5
    y = (rng.random(n) < 1 / (1 + np.exp(-logits))).astype(float)
    return X, y


# linear


def test_ols_satisfies_normal_equations():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 4)) * [1.0, 10.0, 0.1, 5.0]
    y = X @ [1.0, -2.0, 3.0, 0.5] + 4.0 + rng.normal(size=200)

    model = fit_linear(X, y)
    Xa = np.hstack([X, np.ones((200, 1))])
    residual = Xa.T @ (y - model.predict(X))

    assert np.linalg.norm(residual) < 1e-8 * np.linalg.norm(Xa) * np.linalg.norm(y)


def test_ols_recovers_exact_coefficients():
    X = np.linspace(0.0, 1.0, 30)[:, None]
    model = fit_linear(X, 1.0 + 2.0 * X[:, 0])

    assert model.coefficients == pytest.approx([2.0])
    assert model.intercept == pytest.approx(1.0)


@pytest.mark.parametrize("alpha", [0.01, 1.0, 100.0])
def test_ridge_matches_reference_solution(alpha):
    rng = np.random.default_rng(1)
    X = rng.normal(size=(150, 5))
    y = X @ rng.normal(size=5) + rng.normal(size=150)

    ours = fit_linear(X, y, alpha=alpha, standardize=False)
    reference = Ridge(alpha=alpha).fit(X, y)

    assert ours.coefficients == pytest.approx(reference.coef_, rel=1e-8, abs=1e-10)
    assert ours.intercept == pytest.approx(reference.intercept_, rel=1e-8, abs=1e-10)


@pytest.mark.parametrize("standardize", [True, False])
def test_ridge_objective_is_stationary_at_fit(standardize):
    rng = np.random.default_rng(8)
    X = rng.normal(size=(120, 3)) * [1.0, 20.0, 0.2]
    y = X @ [0.5, 0.1, -4.0] + rng.normal(size=120)

    model = fit_linear(X, y, alpha=5.0, standardize=standardize)

    assert np.abs(ridge_objective_gradient(model, X, y)).max() < 1e-7 * (1 + np.abs(y).sum())


def test_ols_handles_collinear_columns(caplog):
    x = np.linspace(-1.0, 1.0, 40)
    X = np.column_stack([x, 2.0 * x])

    model = fit_linear(X, 3.0 * x + 1.0)

    assert model.predict(X) == pytest.approx(3.0 * x + 1.0)
    assert "singular" in caplog.text


def test_huge_ridge_penalty_shrinks_to_the_mean():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(100, 3))
    y = X @ [2.0, -1.0, 0.5] + 3.0

    model = fit_linear(X, y, alpha=1e8)

    assert np.abs(model.coefficients).max() < 1e-4
    assert model.intercept == pytest.approx(y.mean(), abs=1e-3)


def test_linear_rejects_negative_penalty_and_bad_shapes():
    with pytest.raises(LearnerError):
        fit_linear(np.zeros((3, 1)), np.zeros(3), alpha=-1.0)
    with pytest.raises(LearnerError):
        fit_linear(np.zeros((3, 1)), np.zeros(4))


# logistic


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n, m = int(rng.integers(20, 80)), int(rng.integers(1, 6))
        Za = np.hstack([rng.normal(size=(n, m)), np.ones((n, 1))])
        y = rng.integers(0, 2, n).astype(float)
        theta = rng.normal(size=m + 1)
        penalty = float(rng.uniform(0.0, 1.0))

        h = 1e-6
        numeric = np.array(
            [
                (
                    logistic_objective(theta + h * e, Za, y, penalty)
                    - logistic_objective(theta - h * e, Za, y, penalty)
                )
                / (2 * h)
                for e in np.eye(m + 1)
            ]
        )
        analytic = logistic_gradient(theta, Za, y, penalty)

        assert np.linalg.norm(analytic - numeric) <= 1e-5 * max(np.linalg.norm(analytic), 1e-8)


@pytest.mark.parametrize("penalty", [1e-2, 1.0])
def test_l2_logistic_matches_reference_solution(penalty):
    X, y = _classification_data(4)

    ours = fit_logistic(X, y, penalty=penalty, tol=1e-10, standardize=False)
    reference = LogisticRegression(C=1.0 / (len(y) * penalty), tol=1e-12, max_iter=10_000).fit(X, y)

    assert ours.coefficients == pytest.approx(reference.coef_.ravel(), abs=1e-5)
    assert ours.intercept == pytest.approx(reference.intercept_[0], abs=1e-5)
    assert ours.report.converged


def test_l1_logistic_satisfies_optimality_conditions():
    X, y = _classification_data(5, m=6)
    penalty = 0.02

    model = fit_logistic(X, y, penalty=penalty, penalty_kind=PenaltyKind.l1, tol=1e-7)
    Za = np.hstack([model.scaler.transform(X), np.ones((len(y), 1))])
    grad = logistic_gradient(np.append(model.weights, model.bias), Za, y, 0.0)

    active = model.weights != 0
    assert np.all(np.abs(grad[:-1][~active]) <= penalty + 1e-5)
    assert grad[:-1][active] + penalty * np.sign(model.weights[active]) == pytest.approx(0.0, abs=1e-5)
    assert grad[-1] == pytest.approx(0.0, abs=1e-5)


def test_l1_logistic_large_penalty_zeroes_weights():
    X, y = _classification_data(6)

    model = fit_logistic(X, y, penalty=10.0, penalty_kind="l1")

    assert np.all(model.weights == 0.0)
    assert model.predict_proba(X) == pytest.approx(np.full(len(y), y.mean()), abs=1e-5)


def test_logistic_reports_non_convergence():
    X, y = _classification_data(7)

    with pytest.raises(ConvergenceError) as excinfo:
        fit_logistic(X, y, penalty=1e-2, max_iter=1)

    assert not excinfo.value.report.converged
    assert excinfo.value.report.iterations == 1


def test_logistic_intercept_vanishes_on_mirrored_data():
    X, y = _classification_data(17, n=200)

    model = fit_logistic(np.vstack([X, -X]), np.r_[y, 1.0 - y], tol=1e-10)

    assert model.intercept == pytest.approx(0.0, abs=1e-6)


def test_logistic_on_all_negative_labels_predicts_below_half():
    X, _ = _classification_data(18, n=100)

    model = fit_logistic(X, np.zeros(100))

    assert np.all(model.predict_proba(X) < 0.5)


def test_logistic_requires_binary_target():
    with pytest.raises(LearnerError):
        fit_logistic(np.zeros((3, 1)), np.array([0.0, 1.0, 2.0]))


# lda


def test_lda_separates_gaussian_classes():
    rng = np.random.default_rng(8)
    X = np.vstack([rng.normal(-1.0, 1.0, size=(300, 2)), rng.normal(1.0, 1.0, size=(300, 2))])
    y = np.repeat([0.0, 1.0], 300)

    model = fit_lda(X, y)
    proba = model.predict_proba(np.array([[-2.0, -2.0], [0.0, 0.0], [2.0, 2.0]]))

    assert proba[0] < 0.05 < 0.95 < proba[2]
    assert proba[1] == pytest.approx(0.5, abs=0.1)
    assert model.ridge == 0.0


def test_lda_regularizes_singular_covariance():
    rng = np.random.default_rng(9)
    x = rng.normal(size=100)
    X = np.column_stack([x, x])
    y = (x + rng.normal(scale=0.5, size=100) > 0).astype(float)

    model = fit_lda(X, y)

    assert model.ridge > 0.0
    assert np.all(np.isfinite(model.predict_proba(X)))


def test_lda_identical_class_means_give_even_odds():
    X = np.random.default_rng(19).normal(size=(40, 2))

    model = fit_lda(np.vstack([X, X]), np.repeat([0.0, 1.0], 40))

    assert model.predict_proba(np.array([[0.0, 0.0], [3.0, -1.0]])) == pytest.approx([0.5, 0.5])


def test_lda_priors_follow_class_frequencies():
    X, _ = _classification_data(20, n=200)
    y = np.r_[np.zeros(150), np.ones(50)]

    model = fit_lda(X, y)

    assert model.priors.tolist() == pytest.approx([0.75, 0.25])
    assert model.priors.sum() == pytest.approx(1.0)


def test_lda_needs_two_rows_per_class():
    with pytest.raises(LearnerError, match="2 rows per class"):
        fit_lda(np.arange(4.0)[:, None], np.array([0.0, 0.0, 0.0, 1.0]))


# extremely randomized trees


def test_ert_is_deterministic_across_thread_counts():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(500, 4))
    y = np.sin(X[:, 0]) + rng.normal(scale=0.1, size=500)

    single = fit_ert(X, y, ErtConfig(n_trees=12, seed=3, n_jobs=1, min_samples_leaf=5))
    threaded = fit_ert(X, y, ErtConfig(n_trees=12, seed=3, n_jobs=4, min_samples_leaf=5))
    reseeded = fit_ert(X, y, ErtConfig(n_trees=12, seed=4, n_jobs=1, min_samples_leaf=5))

    assert np.array_equal(single.predict(X), threaded.predict(X))
    assert not np.array_equal(single.predict(X), reseeded.predict(X))


def test_ert_respects_leaf_size_and_learns_signal():
    rng = np.random.default_rng(11)
    X = rng.uniform(-1.0, 1.0, size=(800, 2))
    y = np.where(X[:, 0] > 0, 5.0, -5.0)

    model = fit_ert(X, y, ErtConfig(n_trees=20, min_samples_leaf=15, max_features=2))

    for tree in model.trees:
        leaves = tree.feature == -1
        assert tree.samples[leaves].min() >= 15
    assert np.corrcoef(model.predict(X), y)[0, 1] > 0.9


def test_ert_classifier_outputs_probabilities():
    X, y = _classification_data(12)

    model = fit_ert(X, y, ErtConfig(n_trees=10), task="classification")
    proba = model.predict_proba(X)

    assert np.all((proba >= 0.0) & (proba <= 1.0))


def test_ert_constant_target_predicts_the_constant():
    X = np.random.default_rng(21).normal(size=(50, 2))

    model = fit_ert(X, np.full(50, 0.7), ErtConfig(n_trees=5, min_samples_leaf=2))

    assert all(tree.value.tolist() == [0.7] for tree in model.trees)
    assert model.predict(X) == pytest.approx(np.full(50, 0.7), rel=1e-12)


def test_ert_large_leaf_size_keeps_only_the_root():
    rng = np.random.default_rng(22)
    X = rng.normal(size=(50, 2))
    y = X[:, 0] + rng.normal(size=50)

    model = fit_ert(X, y, ErtConfig(n_trees=3, min_samples_leaf=30))

    assert all(tree.feature.tolist() == [-1] for tree in model.trees)
    assert model.predict(X) == pytest.approx(np.full(50, y.mean()))


def test_ert_predictions_stay_within_target_range():
    rng = np.random.default_rng(23)
    X = rng.normal(size=(200, 3))
    y = rng.lognormal(size=200)

    predictions = fit_ert(X, y, ErtConfig(n_trees=10, min_samples_leaf=3)).predict(3.0 * rng.normal(size=(500, 3)))

    assert predictions.min() >= y.min() - 1e-12
    assert predictions.max() <= y.max() + 1e-12


def test_ert_validates_configuration():
    X = np.zeros((10, 2))
    with pytest.raises(LearnerError, match="max_features"):
        fit_ert(X, np.zeros(10), ErtConfig(max_features=3))
    regression = fit_ert(X, np.zeros(10), ErtConfig(n_trees=2))
    with pytest.raises(LearnerError):
        regression.predict_proba(X)


# smote


def _distance_to_segment(point, a, b):
    direction = b - a
    length = float(direction @ direction)
    if length == 0:
        return float(np.linalg.norm(point - a))
    u = np.clip(float((point - a) @ direction) / length, 0.0, 1.0)
    return float(np.linalg.norm(point - (a + u * direction)))


def test_smote_points_lie_between_minority_neighbours():
    rng = np.random.default_rng(13)
    X = rng.normal(size=(60, 2))
    y = np.r_[np.ones(12), np.zeros(48)]

    X_res, y_res = smote(X, y, k=3, seed=1)

    assert np.array_equal(X_res[:60], X)
    assert np.count_nonzero(y_res == 1) == 48
    minority = X[y == 1]
    for point in X_res[60:]:
        nearest = min(
            _distance_to_segment(point, minority[i], minority[j])
            for i in range(len(minority))
            for j in range(len(minority))
            if i != j
        )
        assert nearest < 1e-9


def test_smote_target_count_and_errors():
    X = np.arange(20.0)[:, None]
    y = np.r_[np.zeros(14), np.ones(6)]

    _, y_res = smote(X, y, k=5, target_minority_count=10)
    assert np.count_nonzero(y_res == 1) == 10
    assert minority_label(y) == 1

    with pytest.raises(LearnerError, match="minority rows"):
        smote(X, y, k=6)
    with pytest.raises(LearnerError, match="below"):
        smote(X, y, k=2, target_minority_count=4)


@settings(max_examples=20)
@given(st.integers(min_value=0, max_value=10_000))
def test_smote_is_seeded(seed):
    X, y = _classification_data(14, n=80)

    first, _ = smote(X, y, k=3, seed=seed)
    second, _ = smote(X, y, k=3, seed=seed)

    assert np.array_equal(first, second)


# registry


def test_builders_dispatch_on_learner_role():
    X, y = _classification_data(15, n=120)

    assert build_regressor(OlsSpec(), X, y).predict(X).shape == (120,)
    assert build_regressor(RidgeSpec(alpha=2.0), X, y).alpha == 2.0
    assert build_classifier(LdaSpec(), X, y).predict_proba(X).shape == (120,)
    assert build_classifier(ErtSpec(n_trees=3), X, y, seed=1).predict_proba(X).shape == (120,)
    with pytest.raises(LearnerError):
        build_classifier(OlsSpec(), X, y)
    with pytest.raises(LearnerError):
        build_regressor(LogisticSpec(), X, y)


def test_saved_models_reload_with_identical_predictions():
    X, y = _classification_data(16, n=150)
    models = [
        fit_linear(X, y, alpha=1.0),
        fit_logistic(X, y),
        fit_lda(X, y),
        fit_ert(X, y, ErtConfig(n_trees=3), task="classification"),
    ]

    for model in models:
        restored = load_model(model.to_dict())
        predict = "predict_proba" if hasattr(model, "predict_proba") else "predict"
        assert np.array_equal(getattr(restored, predict)(X), getattr(model, predict)(X))

    with pytest.raises(LearnerError, match="version"):
        load_model({**models[0].to_dict(), "format_version": 99})
