"""
Tests for One-vs-Rest Logistic Regression
"""

import json

import numpy as np
import pytest
from scipy import sparse
from core.errors import ArtifactIOError, DataError, InvalidConfig
from core.ynote import tokenize
from stages.features import VectorizerConfig, fit_vocabulary, transform_corpus
from stages.model import (
    BinaryLogisticObjective,
    DimensionMismatch,
    OvrModel,
    Sign,
    SingleClassInput,
    TrainConfig,
    UnknownClass,
    compute_sample_weights,
    load_model,
    predict,
    predict_proba,
    save_model,
    top_features,
    train_ovr,
)


def _toy_corpus():
    songs = ["G402G402E508", "G402E508G402", "E508G402G402",
             "C516C516D504", "C516D504C516", "D504C516C516",
             "00020002A404", "0002A4040002", "A40400020002"]
    labels = [0, 0, 0, 1, 1, 1, 2, 2, 2]
    seqs = [tokenize(s) for s in songs]
    vocab = fit_vocabulary(seqs, VectorizerConfig(ngram_min=1, ngram_max=1, min_df=1, max_df=1.0))
    X, _ = transform_corpus(seqs, vocab)
    return X, np.asarray(labels), vocab


def test_gradient_matches_finite_differences():
    """Test the analytic gradient against central differences."""
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(10):
        n, d = int(rng.integers(5, 15)), int(rng.integers(2, 6))
        X = sparse.csr_matrix(rng.normal(size=(n, d)))
        t = rng.choice([-1.0, 1.0], size=n)
        s = rng.uniform(0.5, 2.0, size=n)
        objective = BinaryLogisticObjective(X, t, s, C=float(rng.uniform(0.1, 10.0)))
        params = rng.normal(size=d + 1)
        _, grad = objective(params)
        numeric = np.empty_like(params)
        for j in range(params.size):
            step = np.zeros_like(params)
            step[j] = h
            numeric[j] = (objective(params + step)[0] - objective(params - step)[0]) / (2 * h)
        rel = np.abs(grad - numeric) / np.maximum(1.0, np.abs(numeric))
        assert rel.max() <= 1e-4


def test_intercept_not_penalized():
    """Test the regularizer ignores the intercept."""
    X = sparse.csr_matrix(np.zeros((2, 1)))
    objective = BinaryLogisticObjective(X, np.array([1.0, 1.0]), np.ones(2), C=1.0)
    loss_a, _ = objective(np.array([0.0, 3.0]))
    expected = 2 * np.log1p(np.exp(-3.0))
    assert loss_a == pytest.approx(expected)


def test_balanced_weights():
    """Test balanced weight equals n / (K * count)."""
    y = np.asarray([0] * 669 + [1] * 18894 + [2] * 1835)
    weights = compute_sample_weights(y, "balanced")
    assert weights[0] == pytest.approx(21398 / (3 * 669), rel=1e-9)
    assert weights[0] == pytest.approx(10.66, abs=0.01)
    assert np.all(compute_sample_weights(y, "uniform") == 1.0)


def test_separable_toy_set():
    """Test a separable set is fit to training accuracy 1.0."""
    X, y, vocab = _toy_corpus()
    model = train_ovr(X, y, TrainConfig(), vocabulary=vocab)
    assert model.classes == (0, 1, 2)
    assert np.array_equal(predict(model, X), y)
    assert all(r.converged for r in model.fit_reports)


def test_predict_proba_rows_sum_to_one():
    """Test probabilities are normalized, and 1-D input gives 1-D output."""
    X, y, vocab = _toy_corpus()
    model = train_ovr(X, y, TrainConfig(), vocabulary=vocab)
    probs = predict_proba(model, X)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    single = predict_proba(model, X[0].toarray()[0])
    assert single.shape == (3,)
    assert isinstance(predict(model, X[0].toarray()[0]), int)


def test_zero_model_uniform_probabilities():
    """Test all-zero weights give uniform probabilities and the lowest class."""
    model = OvrModel(classes=(0, 1, 2), coef=np.zeros((3, 4)), intercept=np.zeros(3))
    x = np.zeros(4)
    np.testing.assert_allclose(predict_proba(model, x), [1 / 3] * 3)
    assert predict(model, x) == 0


def test_extreme_scores_stay_finite():
    """Test very negative scores do not produce NaN."""
    model = OvrModel(classes=(0, 1), coef=np.zeros((2, 1)), intercept=np.array([-1000.0, -1200.0]))
    probs = predict_proba(model, np.zeros(1))
    assert np.all(np.isfinite(probs))
    assert probs[0] == pytest.approx(1.0)


def test_convex_objective_same_optimum():
    """Test zero and random starts reach the same coefficients."""
    X, y, vocab = _toy_corpus()
    a = train_ovr(X, y, TrainConfig(tol=1e-8), vocabulary=vocab)
    b = train_ovr(X, y, TrainConfig(tol=1e-8, init="random", seed=9), vocabulary=vocab)
    np.testing.assert_allclose(a.coef, b.coef, atol=1e-5)
    np.testing.assert_allclose(a.intercept, b.intercept, atol=1e-5)


def test_training_deterministic_and_parallel_safe():
    """Test repeated and parallel fits give identical coefficients."""
    X, y, vocab = _toy_corpus()
    a = train_ovr(X, y, TrainConfig(), vocabulary=vocab)
    b = train_ovr(X, y, TrainConfig(n_jobs=3), vocabulary=vocab)
    assert np.array_equal(a.coef, b.coef)
    assert np.array_equal(a.intercept, b.intercept)


def test_single_class_rejected():
    """Test training needs two classes."""
    X, _, _ = _toy_corpus()
    with pytest.raises(SingleClassInput):
        train_ovr(X, np.zeros(X.shape[0], dtype=int), TrainConfig())


def test_dimension_mismatch():
    """Test row/label and feature width mismatches."""
    X, y, vocab = _toy_corpus()
    with pytest.raises(DimensionMismatch):
        train_ovr(X, y[:-1], TrainConfig())
    model = train_ovr(X, y, TrainConfig(), vocabulary=vocab)
    with pytest.raises(DimensionMismatch):
        predict_proba(model, np.zeros(X.shape[1] + 1))


def test_train_config_validation():
    """Test invalid training settings."""
    with pytest.raises(InvalidConfig):
        TrainConfig(regularization_strength=0.0)
    with pytest.raises(InvalidConfig):
        TrainConfig(class_weight="heavy")
    with pytest.raises(InvalidConfig):
        TrainConfig(init="ones")


def test_top_features_signs():
    """Test positive, negative and absolute rankings."""
    X, y, vocab = _toy_corpus()
    model = train_ovr(X, y, TrainConfig(), vocabulary=vocab)
    positive = top_features(model, 2, 2, Sign.POSITIVE)
    assert {g.text for g, _ in positive} == {"0002", "A404"}
    assert all(c > 0 for _, c in positive)
    negative = top_features(model, 2, 10, Sign.NEGATIVE)
    assert all(c < 0 for _, c in negative)
    assert [c for _, c in negative] == sorted(c for _, c in negative)
    absolute = top_features(model, 2, 10, Sign.ABSOLUTE)
    magnitudes = [abs(c) for _, c in absolute]
    assert magnitudes == sorted(magnitudes, reverse=True)
    assert top_features(model, 2, 0) == []


def test_top_features_errors():
    """Test unknown class and missing vocabulary."""
    X, y, vocab = _toy_corpus()
    model = train_ovr(X, y, TrainConfig(), vocabulary=vocab)
    with pytest.raises(UnknownClass):
        top_features(model, 7, 3)
    bare = OvrModel(classes=(0, 1), coef=np.zeros((2, 2)), intercept=np.zeros(2))
    with pytest.raises(InvalidConfig):
        top_features(bare, 0, 3)


def test_save_load_round_trip(tmp_path):
    """Test the artifact reloads to identical predictions and bytes."""
    X, y, vocab = _toy_corpus()
    model = train_ovr(X, y, TrainConfig(), vocabulary=vocab)
    path = tmp_path / "model.json"
    digest = save_model(model, str(path))
    loaded = load_model(str(path))
    np.testing.assert_array_equal(predict_proba(loaded, X), predict_proba(model, X))
    assert loaded.vocabulary.terms == vocab.terms

    again = tmp_path / "again.json"
    assert save_model(loaded, str(again)) == digest
    assert again.read_bytes() == path.read_bytes()


def test_load_model_detects_tampering(tmp_path):
    """Test edited coefficients fail the hash check."""
    X, y, vocab = _toy_corpus()
    path = tmp_path / "model.json"
    save_model(train_ovr(X, y, TrainConfig(), vocabulary=vocab), str(path))
    data = json.loads(path.read_text())
    data["coef"][0][0] += 1.0
    path.write_text(json.dumps(data))
    with pytest.raises(DataError, match="hash"):
        load_model(str(path))


def test_load_model_missing_file(tmp_path):
    """Test unreadable artifacts raise an I/O error."""
    with pytest.raises(ArtifactIOError):
        load_model(str(tmp_path / "missing.json"))
