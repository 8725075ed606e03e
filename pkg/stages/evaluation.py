"""
Evaluation
Stratified splitting, k-fold cross-validation folds, and the reported metrics:
accuracy, precision/recall/F1 report, confusion matrix, ROC-AUC.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from core.config import class_name
from core.errors import DataError, DegenerateDataError, InvalidConfig
from core.utils import make_rng

logger = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "val", "test")
RATIO_TOLERANCE = 1e-9


class ClassTooSmallForSplit(DegenerateDataError):
    """Raised when a class has fewer samples than splits."""
    pass


class ClassSmallerThanK(DegenerateDataError):
    """Raised when a class has fewer samples than folds."""
    pass


class LengthMismatch(DataError):
    """Raised when label/prediction/score arrays differ in length."""
    pass


class DegenerateClass(DegenerateDataError):
    """Raised when a one-vs-rest problem has no positives or no negatives."""
    pass


class Normalize(str, Enum):
    NONE = "none"
    TRUE_ROWS = "true_rows"


class AucMode(str, Enum):
    PER_CLASS = "per_class"
    MICRO = "micro"
    MACRO = "macro"


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.65
    val: float = 0.15
    test: float = 0.20
    seed: int = 42
    stratified: bool = True

    def __post_init__(self):
        ratios = self.ratios
        if any(r <= 0 for r in ratios):
            raise InvalidConfig(f"Split ratios must be positive, got {ratios}")
        if abs(sum(ratios) - 1.0) > RATIO_TOLERANCE:
            raise InvalidConfig(f"Split ratios must sum to 1, got {sum(ratios):.6f}")
        if self.seed < 0:
            raise InvalidConfig(f"seed must be unsigned, got {self.seed}")

    @property
    def ratios(self) -> tuple[float, float, float]:
        return (self.train, self.val, self.test)

    def to_dict(self) -> dict:
        return {"train": self.train, "val": self.val, "test": self.test,
                "seed": self.seed, "stratified": self.stratified}


def _check_lengths(*arrays) -> None:
    sizes = {len(a) for a in arrays}
    if len(sizes) > 1:
        raise LengthMismatch(f"Inputs differ in length: {[len(a) for a in arrays]}")


def allocate_split_counts(class_counts: Sequence[int], ratios: Sequence[float]) -> list[list[int]]:
    """
    Largest-remainder allocation of each class across splits.

    Each class is rounded on its own: floor(ratio * count) per split, then
    the leftover samples go to the largest fractional remainders, ties to
    the earlier split. A class with at least one sample per split never
    leaves a split empty: the largest split gives one up (3 samples → 1/1/1).

    Args:
        class_counts: Samples per class
        ratios: Split ratios (summing to 1)

    Returns:
        counts[class][split]

    Example:
        [50, 30, 20], (.65, .15, .20) → [[33, 7, 10], [20, 4, 6], [13, 3, 4]]
    """
    n_splits = len(ratios)
    result = []
    for count in class_counts:
        shares = [r * count for r in ratios]
        # guard the floor against 19.999999999 style products
        alloc = [int(math.floor(s + 1e-9)) for s in shares]
        remainders = [round(s - a, 9) for s, a in zip(shares, alloc)]
        leftover = count - sum(alloc)
        order = sorted(range(n_splits), key=lambda s: (-remainders[s], s))
        for s in order[:leftover]:
            alloc[s] += 1
        if count >= n_splits:
            for s in range(n_splits):
                if alloc[s] == 0:
                    donor = max(range(n_splits), key=lambda j: (alloc[j], -j))
                    alloc[donor] -= 1
                    alloc[s] += 1
        result.append(alloc)
    return result


def stratified_split(y: Sequence[int], spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Split indices into train/val/test preserving class proportions.

    Args:
        y: Labels
        spec: Ratios, seed, stratification flag

    Returns:
        Sorted (train_idx, val_idx, test_idx); disjoint and exhaustive

    Raises:
        ClassTooSmallForSplit: A class (or the whole set, unstratified) has < 3 samples
    """
    y = np.asarray(y, dtype=np.int64)
    if spec.stratified:
        groups = [np.flatnonzero(y == c) for c in np.unique(y)]
    else:
        groups = [np.arange(y.shape[0])]

    for members in groups:
        if members.size < len(SPLIT_NAMES):
            label = y[members[0]] if members.size else "?"
            raise ClassTooSmallForSplit(
                f"Class {label} has {members.size} sample(s); each split needs at least one"
            )

    counts = allocate_split_counts([m.size for m in groups], spec.ratios)
    rng = make_rng(spec.seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for members, alloc in zip(groups, counts):
        shuffled = members[rng.permutation(members.size)]
        start = 0
        for s, n in enumerate(alloc):
            parts[s].append(shuffled[start:start + n])
            start += n

    train, val, test = (np.sort(np.concatenate(p)).astype(np.int64) for p in parts)
    logger.info("Split %d songs into train=%d val=%d test=%d", y.shape[0], train.size, val.size, test.size)
    return train, val, test


def stratified_kfold(y: Sequence[int], k: int, seed: int) -> list[np.ndarray]:
    """
    Partition indices into k folds with per-class counts differing by at most one.

    Each class is shuffled and dealt round-robin; the dealing position carries
    over between classes so fold sizes also stay within one of each other.

    Args:
        y: Labels
        k: Number of folds (>= 2)
        seed: Shuffle seed

    Returns:
        k sorted index arrays

    Raises:
        InvalidConfig: k < 2
        ClassSmallerThanK: A class has fewer than k samples
    """
    if k < 2:
        raise InvalidConfig(f"Number of folds must be >= 2, got {k}")
    y = np.asarray(y, dtype=np.int64)
    rng = make_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    position = 0
    for label in np.unique(y):
        members = np.flatnonzero(y == label)
        if members.size < k:
            raise ClassSmallerThanK(f"Class {label} has {members.size} sample(s), fewer than k={k}")
        for idx in members[rng.permutation(members.size)]:
            folds[position % k].append(int(idx))
            position += 1
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def cross_validation_summary(accuracies: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation of fold accuracies."""
    values = np.asarray(accuracies, dtype=np.float64)
    return float(values.mean()), float(values.std(ddof=0))


def accuracy_score(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    """Fraction of exact matches."""
    _check_lengths(y_true, y_pred)
    if len(y_true) == 0:
        return 0.0
    return float(np.mean(np.asarray(y_true) == np.asarray(y_pred)))


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int],
                     normalize: Normalize = Normalize.NONE,
                     labels: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    M[i][j] = count(true == labels[i], pred == labels[j]).

    Args:
        y_true: True labels
        y_pred: Predicted labels
        normalize: TRUE_ROWS divides each row by its sum (empty rows stay zero)
        labels: Label order (default: sorted union of y_true and y_pred)

    Returns:
        Square matrix (int counts, or float when normalized)

    Raises:
        LengthMismatch: Inputs differ in length
        DataError: A label falls outside `labels`
    """
    _check_lengths(y_true, y_pred)
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if labels is None:
        labels = np.unique(np.concatenate([y_true, y_pred]))
    position = {int(label): i for i, label in enumerate(labels)}

    matrix = np.zeros((len(position), len(position)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if int(t) not in position or int(p) not in position:
            raise DataError(f"Label pair ({t}, {p}) is outside the class set {list(position)}")
        matrix[position[int(t)], position[int(p)]] += 1

    if Normalize(normalize) is Normalize.NONE:
        return matrix
    row_sums = matrix.sum(axis=1, keepdims=True).astype(np.float64)
    return np.divide(matrix, row_sums, out=np.zeros(matrix.shape, dtype=np.float64), where=row_sums > 0)


@dataclass
class ClassMetrics:
    label: int
    precision: float
    recall: float
    f1: float
    support: int

    @property
    def name(self) -> str:
        return class_name(self.label)


@dataclass
class EvalReport:
    """
    Classification report in the layout of the published results table, plus
    confusion matrices and (optionally) ROC-AUC.
    """
    classes: list[int]
    per_class: list[ClassMetrics]
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    total_support: int
    accuracy: float
    confusion_raw: np.ndarray
    confusion_normalized: np.ndarray
    zero_division: list[str] = field(default_factory=list)
    auc_per_class: Optional[dict[int, float]] = None
    auc_micro: Optional[float] = None
    auc_macro: Optional[float] = None

    def to_dict(self) -> dict:
        data = {
            "schema_version": 1,
            "classes": [{"label": c, "name": class_name(c)} for c in self.classes],
            "per_class": [
                {"label": m.label, "name": m.name, "precision": m.precision,
                 "recall": m.recall, "f1": m.f1, "support": m.support}
                for m in self.per_class
            ],
            "weighted_avg": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
                "support": self.total_support,
            },
            "accuracy": self.accuracy,
            "confusion_matrix": {
                "raw": self.confusion_raw.tolist(),
                "normalized": self.confusion_normalized.tolist(),
            },
            "zero_division": list(self.zero_division),
        }
        if self.auc_per_class is not None:
            data["roc_auc"] = {
                "per_class": {class_name(c): v for c, v in self.auc_per_class.items()},
                "micro": self.auc_micro,
                "macro": self.auc_macro,
            }
        return data

    def format_table(self) -> str:
        """Human-readable report: metrics table, normalized confusion matrix, AUC lines."""
        names = [class_name(c) for c in self.classes]
        width = max([len("Weighted average / Total")] + [len(n) for n in names])
        lines = [f"{'Class':<{width}}  Precision  Recall  F1-Score  Support"]
        for m in self.per_class:
            lines.append(f"{m.name:<{width}}  {m.precision:9.2f}  {m.recall:6.2f}  {m.f1:8.2f}  {m.support:7d}")
        lines.append(
            f"{'Weighted average / Total':<{width}}  {self.weighted_precision:9.2f}  "
            f"{self.weighted_recall:6.2f}  {self.weighted_f1:8.2f}  {self.total_support:7d}"
        )
        lines.append("")
        lines.append(f"Accuracy: {self.accuracy:.4f}")
        lines.append("")
        lines.append("Normalized confusion matrix (rows = true, columns = predicted)")
        col = max(9, max(len(n) for n in names))
        lines.append(" " * (width + 2) + "".join(f"{n:>{col + 1}}" for n in names))
        for name, row in zip(names, self.confusion_normalized):
            lines.append(f"{name:<{width}}  " + "".join(f"{v:>{col + 1}.4f}" for v in row))
        if self.auc_per_class is not None:
            lines.append("")
            lines.append(f"Micro-average ROC-AUC: {self.auc_micro:.4f}")
            lines.append(f"Macro-average ROC-AUC: {self.auc_macro:.4f}")
            for c, value in self.auc_per_class.items():
                lines.append(f"  {class_name(c)}: {value:.4f}")
        if self.zero_division:
            lines.append("")
            lines.append("Zero-division (reported as 0): " + ", ".join(self.zero_division))
        return "\n".join(lines)


def classification_report(y_true: Sequence[int], y_pred: Sequence[int],
                          labels: Optional[Sequence[int]] = None) -> EvalReport:
    """
    Per-class precision, recall, F1 and support with support-weighted averages.

    Args:
        y_true: True labels
        y_pred: Predicted labels
        labels: Class order (default: sorted union)

    Returns:
        EvalReport (AUC fields unset; see evaluate_scores)

    Raises:
        LengthMismatch: Inputs differ in length

    Undefined ratios (zero denominators) are reported as 0 and listed in
    `zero_division`.
    """
    _check_lengths(y_true, y_pred)
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if labels is None:
        labels = [int(c) for c in np.unique(np.concatenate([y_true, y_pred]))]
    labels = [int(c) for c in labels]

    raw = confusion_matrix(y_true, y_pred, labels=labels)
    normalized = confusion_matrix(y_true, y_pred, Normalize.TRUE_ROWS, labels=labels)

    per_class, flags = [], []
    for i, label in enumerate(labels):
        tp = int(raw[i, i])
        predicted = int(raw[:, i].sum())
        support = int(raw[i, :].sum())
        if predicted == 0:
            flags.append(f"{class_name(label)} precision")
        if support == 0:
            flags.append(f"{class_name(label)} recall")
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
        per_class.append(ClassMetrics(label, precision, recall, f1, support))

    for flag in flags:
        logger.warning("Zero division in %s; reported as 0", flag)

    total = int(raw.sum())
    supports = np.asarray([m.support for m in per_class], dtype=np.float64)

    def weighted(values):
        return float(np.dot(supports, values) / total) if total else 0.0

    return EvalReport(
        classes=labels,
        per_class=per_class,
        weighted_precision=weighted([m.precision for m in per_class]),
        weighted_recall=weighted([m.recall for m in per_class]),
        weighted_f1=weighted([m.f1 for m in per_class]),
        total_support=total,
        accuracy=float(np.trace(raw) / total) if total else 0.0,
        confusion_raw=raw,
        confusion_normalized=normalized,
        zero_division=flags,
    )


def _binary_auc(is_positive: np.ndarray, scores: np.ndarray) -> float:
    """Mann-Whitney AUC with average ranks for ties."""
    n_pos = int(is_positive.sum())
    n_neg = int(is_positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClass(f"AUC needs positives and negatives, got {n_pos} / {n_neg}")
    ranks = rankdata(scores, method="average")
    u = ranks[is_positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_auc(y_true: Sequence[int], scores, mode: AucMode = AucMode.MACRO,
            labels: Optional[Sequence[int]] = None):
    """
    One-vs-rest ROC-AUC from per-class scores.

    Args:
        y_true: True labels
        scores: (n_samples, n_classes) scores, columns in `labels` order
        mode: PER_CLASS → {label: auc}; MACRO → mean of per-class AUCs;
            MICRO → AUC over the flattened indicator/score pairs
        labels: Column labels (default: 0..n_classes-1)

    Returns:
        dict for PER_CLASS, float otherwise

    Raises:
        LengthMismatch: Score rows and labels differ in count
        DegenerateClass: Some binary problem lacks positives or negatives
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    _check_lengths(y_true, scores)
    if labels is None:
        labels = list(range(scores.shape[1]))
    if len(labels) != scores.shape[1]:
        raise LengthMismatch(f"{scores.shape[1]} score columns for {len(labels)} labels")

    indicator = np.column_stack([y_true == label for label in labels])
    mode = AucMode(mode)
    if mode is AucMode.MICRO:
        return _binary_auc(indicator.ravel(), scores.ravel())

    per_class = {int(label): _binary_auc(indicator[:, i], scores[:, i]) for i, label in enumerate(labels)}
    if mode is AucMode.PER_CLASS:
        return per_class
    return float(np.mean(list(per_class.values())))


def evaluate_scores(y_true: Sequence[int], y_pred: Sequence[int], scores,
                    labels: Sequence[int]) -> EvalReport:
    """
    Full report: classification metrics, confusion matrices and ROC-AUC.

    AUC is skipped (left unset, with a warning) when a class is absent from y_true.
    """
    report = classification_report(y_true, y_pred, labels=labels)
    try:
        report.auc_per_class = roc_auc(y_true, scores, AucMode.PER_CLASS, labels=labels)
        report.auc_micro = roc_auc(y_true, scores, AucMode.MICRO, labels=labels)
        report.auc_macro = float(np.mean(list(report.auc_per_class.values())))
    except DegenerateClass as e:
        logger.warning("ROC-AUC not reported: %s", e)
    return report
