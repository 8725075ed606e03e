"""
Tests for Evaluation
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from core.errors import InvalidConfig
from core.schema_validator import validate_eval_report
from stages.evaluation import (
    AucMode,
    ClassSmallerThanK,
    ClassTooSmallForSplit,
    DegenerateClass,
    LengthMismatch,
    Normalize,
    SplitSpec,
    accuracy_score,
    allocate_split_counts,
    classification_report,
    confusion_matrix,
    cross_validation_summary,
    evaluate_scores,
    roc_auc,
    stratified_kfold,
    stratified_split,
)


def _pair_count_auc(is_positive, scores):
    pos = scores[is_positive]
    neg = scores[~is_positive]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (pos.size * neg.size)


def _largest_remainder(count, ratios):
    shares = [Fraction(str(r)) * count for r in ratios]
    alloc = [math.floor(s) for s in shares]
    order = sorted(range(len(ratios)), key=lambda s: (-(shares[s] - alloc[s]), s))
    for s in order[:count - sum(alloc)]:
        alloc[s] += 1
    if count >= len(ratios):
        for s in range(len(ratios)):
            if alloc[s] == 0:
                donor = max(range(len(ratios)), key=lambda j: (alloc[j], -j))
                alloc[donor] -= 1
                alloc[s] += 1
    return alloc


def test_allocate_split_counts_example():
    """Test the 50/30/20 allocation; the 30-sample class ties on .5 and the tie goes to train."""
    assert allocate_split_counts([50, 30, 20], (0.65, 0.15, 0.20)) == [[33, 7, 10], [20, 4, 6], [13, 3, 4]]


def test_allocate_split_counts_classes_independent():
    """Test identical classes get identical rows whatever their order."""
    ratios = (0.65, 0.15, 0.20)
    assert allocate_split_counts([7, 7], ratios) == [[5, 1, 1], [5, 1, 1]]
    forward = allocate_split_counts([7, 13], ratios)
    backward = allocate_split_counts([13, 7], ratios)
    assert forward == backward[::-1]


def test_allocate_split_counts_floor_or_ceiling():
    """Test every per-class count is the floor or ceiling of its exact share."""
    rng = np.random.default_rng(1)
    ratios = (0.65, 0.15, 0.20)
    for _ in range(30):
        counts = [int(c) for c in rng.integers(7, 200, size=int(rng.integers(2, 5)))]
        result = allocate_split_counts(counts, ratios)
        for count, alloc in zip(counts, result):
            assert sum(alloc) == count
            for r, a in zip(ratios, alloc):
                assert math.floor(r * count + 1e-9) <= a <= math.ceil(r * count - 1e-9)


def test_stratified_split_matches_largest_remainder():
    """Test per-class split counts equal exact largest-remainder rounding on random label vectors."""
    rng = np.random.default_rng(2)
    spec = SplitSpec()
    for _ in range(30):
        y = rng.integers(0, 3, size=int(rng.integers(30, 300)))
        if np.bincount(y, minlength=3).min() < 3:
            continue
        parts = stratified_split(y, spec)
        for c in np.unique(y):
            expected = _largest_remainder(int((y == c).sum()), spec.ratios)
            assert [int((y[p] == c).sum()) for p in parts] == expected
        joined = np.concatenate(parts)
        assert sorted(joined.tolist()) == list(range(y.size))


def test_stratified_split_small_sets():
    """Test 10/5/5 examples and the three-sample minimum."""
    y = [0] * 10 + [1] * 5 + [2] * 5
    train, val, test = stratified_split(y, SplitSpec())
    assert (train.size, val.size, test.size) == (13, 3, 4)

    train, val, test = stratified_split([0, 0, 0], SplitSpec())
    assert (train.size, val.size, test.size) == (1, 1, 1)

    with pytest.raises(ClassTooSmallForSplit):
        stratified_split([0, 0, 1, 1, 1], SplitSpec())


def test_stratified_split_deterministic():
    """Test equal seeds give equal splits."""
    y = [0] * 20 + [1] * 20
    a = stratified_split(y, SplitSpec(seed=5))
    b = stratified_split(y, SplitSpec(seed=5))
    for x, z in zip(a, b):
        assert np.array_equal(x, z)


def test_split_spec_validation():
    """Test ratios must be positive and sum to one."""
    with pytest.raises(InvalidConfig):
        SplitSpec(train=0.6, val=0.1, test=0.2)
    with pytest.raises(InvalidConfig):
        SplitSpec(train=1.0, val=0.0, test=0.0)


def test_stratified_kfold_partition():
    """Test folds partition the indices with per-class imbalance at most one."""
    rng = np.random.default_rng(4)
    for _ in range(20):
        y = rng.integers(0, 3, size=int(rng.integers(40, 200)))
        if np.bincount(y, minlength=3).min() < 5:
            continue
        folds = stratified_kfold(y, 5, seed=42)
        joined = np.concatenate(folds)
        assert sorted(joined.tolist()) == list(range(y.size))
        for c in np.unique(y):
            per_fold = [int((y[f] == c).sum()) for f in folds]
            assert max(per_fold) - min(per_fold) <= 1
        sizes = [f.size for f in folds]
        assert max(sizes) - min(sizes) <= 1


def test_stratified_kfold_errors():
    """Test invalid k and classes smaller than k."""
    with pytest.raises(InvalidConfig):
        stratified_kfold([0, 1, 0, 1], 1, seed=0)
    with pytest.raises(ClassSmallerThanK):
        stratified_kfold([0] * 10 + [1] * 3, 5, seed=0)


def test_cross_validation_summary_population_std():
    """Test mean and population standard deviation."""
    mean, std = cross_validation_summary([0.9, 1.0])
    assert mean == pytest.approx(0.95)
    assert std == pytest.approx(0.05)


def test_confusion_matrix_and_normalization():
    """Test raw counts and row normalization with an empty row."""
    y_true = [0, 0, 1, 1, 1]
    y_pred = [0, 1, 1, 1, 0]
    raw = confusion_matrix(y_true, y_pred, labels=[0, 1, 2])
    assert raw.tolist() == [[1, 1, 0], [1, 2, 0], [0, 0, 0]]
    norm = confusion_matrix(y_true, y_pred, Normalize.TRUE_ROWS, labels=[0, 1, 2])
    np.testing.assert_allclose(norm, [[0.5, 0.5, 0], [1 / 3, 2 / 3, 0], [0, 0, 0]])


def test_classification_report_values():
    """Test precision, recall, F1 and weighted averages."""
    report = classification_report([0, 0, 1, 1], [0, 1, 1, 1])
    class0, class1 = report.per_class
    assert (class0.precision, class0.recall) == (1.0, 0.5)
    assert class0.f1 == pytest.approx(2 / 3)
    assert class1.precision == pytest.approx(2 / 3)
    assert class1.recall == 1.0
    assert report.accuracy == 0.75
    assert report.weighted_recall == pytest.approx(0.75)
    assert validate_eval_report(report.to_dict()) is True


def test_classification_report_zero_division():
    """Test an unpredicted class reports precision 0 and is flagged."""
    report = classification_report([0, 1, 2], [0, 1, 1], labels=[0, 1, 2])
    assert report.per_class[2].precision == 0.0
    assert "LLM precision" in report.zero_division


def test_length_mismatch():
    """Test mismatched label arrays."""
    with pytest.raises(LengthMismatch):
        accuracy_score([0, 1], [0])
    with pytest.raises(LengthMismatch):
        classification_report([0, 1], [0])


def test_auc_examples():
    """Test perfect, inverted and all-tied scores."""
    y = [1, 1, 0, 0]
    scores = np.column_stack([[0.1, 0.2, 0.8, 0.9], [0.9, 0.8, 0.2, 0.1]])
    assert roc_auc(y, scores, AucMode.PER_CLASS) == {0: 1.0, 1: 1.0}
    assert roc_auc(y, scores[:, ::-1], AucMode.PER_CLASS) == {0: 0.0, 1: 0.0}
    tied = np.full((4, 2), 0.5)
    assert roc_auc(y, tied, AucMode.PER_CLASS) == {0: 0.5, 1: 0.5}


def test_auc_matches_pair_counting():
    """Test rank AUC equals brute-force pair counting, ties included."""
    rng = np.random.default_rng(8)
    for _ in range(50):
        n = int(rng.integers(4, 51))
        y = rng.integers(0, 3, size=n)
        y[:3] = [0, 1, 2]
        scores = rng.integers(0, 6, size=(n, 3)) / 5.0
        per_class = roc_auc(y, scores, AucMode.PER_CLASS)
        for c in range(3):
            assert per_class[c] == pytest.approx(_pair_count_auc(y == c, scores[:, c]), abs=1e-12)
        indicator = np.column_stack([y == c for c in range(3)])
        micro = roc_auc(y, scores, AucMode.MICRO)
        assert micro == pytest.approx(_pair_count_auc(indicator.ravel(), scores.ravel()), abs=1e-12)
        macro = roc_auc(y, scores, AucMode.MACRO)
        assert macro == pytest.approx(np.mean(list(per_class.values())), abs=1e-12)


def test_auc_degenerate_class():
    """Test AUC needs positives and negatives."""
    with pytest.raises(DegenerateClass):
        roc_auc([0, 0, 0], np.ones((3, 2)), AucMode.PER_CLASS)


def test_evaluate_scores_skips_degenerate_auc():
    """Test the full report leaves AUC unset when a class is absent."""
    report = evaluate_scores([0, 0, 1], [0, 0, 1], np.eye(3)[[0, 0, 1]], labels=[0, 1, 2])
    assert report.auc_per_class is None
    assert "roc_auc" not in report.to_dict()


def test_format_table_layout():
    """Test the human table lists classes, accuracy and AUC."""
    y = [0, 1, 2, 0, 1, 2]
    scores = np.eye(3)[y]
    table = evaluate_scores(y, y, scores, labels=[0, 1, 2]).format_table()
    assert "Native" in table and "Algorithm" in table and "LLM" in table
    assert "Weighted average / Total" in table
    assert "Accuracy: 1.0000" in table
    assert "Micro-average ROC-AUC: 1.0000" in table
