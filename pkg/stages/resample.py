"""
SMOTE Resampling
Oversample minority classes in TF-IDF space until every class matches the majority.

Applied to the training split only, after vectorization.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from sklearn.neighbors import NearestNeighbors

from core.errors import DataError, DegenerateDataError, InvalidConfig
from core.utils import RNG_NAME, make_rng

logger = logging.getLogger(__name__)

MATCH_MAJORITY = "match_majority"


class ClassTooSmall(DegenerateDataError):
    """Raised when a class that needs oversampling has fewer than 2 samples."""
    pass


@dataclass(frozen=True)
class SmoteConfig:
    target_policy: str = MATCH_MAJORITY
    k_neighbors_cap: int = 5
    seed: int = 42

    def __post_init__(self):
        if self.target_policy != MATCH_MAJORITY:
            raise InvalidConfig(f"Unsupported SMOTE target policy: {self.target_policy!r}")
        if self.k_neighbors_cap < 1:
            raise InvalidConfig(f"k_neighbors_cap must be >= 1, got {self.k_neighbors_cap}")
        if self.seed < 0:
            raise InvalidConfig(f"seed must be unsigned, got {self.seed}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ResampleSummary:
    counts_before: dict[int, int]
    counts_after: dict[int, int]
    k_used: dict[int, int] = field(default_factory=dict)
    rng: str = RNG_NAME
    seed: int = 42
    # (anchor row, neighbour row) in the input matrix, one pair per synthetic row
    parents: list[tuple[int, int]] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "counts_before": {str(k): v for k, v in sorted(self.counts_before.items())},
            "counts_after": {str(k): v for k, v in sorted(self.counts_after.items())},
            "k_used": {str(k): v for k, v in sorted(self.k_used.items())},
            "rng": self.rng,
            "seed": self.seed,
        }


def smote_resample(X, y: Sequence[int], config: SmoteConfig) -> tuple[sparse.csr_matrix, np.ndarray, ResampleSummary]:
    """
    Balance classes by SMOTE interpolation.

    Args:
        X: Feature matrix (sparse or dense), rows aligned with y
        y: Class labels
        config: SMOTE settings

    Returns:
        Tuple of (resampled CSR matrix, labels, summary). Original rows come
        first and are untouched; synthetic rows follow, grouped by class in
        ascending label order.

    Raises:
        DataError: X and y disagree on the number of rows
        ClassTooSmall: A class needing oversampling has fewer than 2 samples

    Each synthetic row is x_i + lam * (x_nn - x_i) with lam ~ U[0, 1] and
    x_nn drawn uniformly from the k nearest same-class neighbours of x_i
    (Euclidean, anchor excluded), k = min(k_neighbors_cap, class_count - 1).
    """
    X = sparse.csr_matrix(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] != y.shape[0]:
        raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]} labels")

    classes, counts = np.unique(y, return_counts=True)
    counts_before = {int(c): int(n) for c, n in zip(classes, counts)}
    target = int(counts.max()) if counts.size else 0
    summary = ResampleSummary(counts_before=counts_before, counts_after=dict(counts_before),
                              seed=config.seed)

    if counts.size == 0 or np.all(counts == target):
        logger.info("SMOTE: classes already balanced, nothing to do")
        return X, y.copy(), summary

    rng = make_rng(config.seed)
    new_blocks, new_labels = [], []

    for label, count in zip(classes, counts):
        label, count = int(label), int(count)
        needed = target - count
        if needed == 0:
            continue
        if count < 2:
            raise ClassTooSmall(f"Class {label} has {count} sample(s); SMOTE needs at least 2")

        k = min(config.k_neighbors_cap, count - 1)
        members = np.flatnonzero(y == label)
        class_X = X[members]
        neighbours = _same_class_neighbours(class_X, k)

        block, pairs = _interpolate(class_X, neighbours, needed, rng)
        new_blocks.append(block)
        summary.parents.extend((int(members[a]), int(members[b])) for a, b in pairs)
        new_labels.append(np.full(needed, label, dtype=np.int64))
        summary.k_used[label] = k
        summary.counts_after[label] = target
        logger.info("SMOTE: class %d oversampled %d -> %d (k=%d)", label, count, target, k)

    X_out = sparse.vstack([X] + new_blocks, format="csr")
    y_out = np.concatenate([y] + new_labels)
    return X_out, y_out, summary


def _same_class_neighbours(class_X: sparse.csr_matrix, k: int) -> np.ndarray:
    """k nearest neighbours per row (positions within class_X), the row itself excluded."""
    n = class_X.shape[0]
    search = NearestNeighbors(n_neighbors=k + 1, algorithm="brute", metric="euclidean")
    search.fit(class_X)
    found = search.kneighbors(class_X, return_distance=False)

    result = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        # duplicates can rank another row ahead of the anchor itself
        others = [j for j in found[i] if j != i]
        result[i] = others[:k]
    return result


def _interpolate(class_X: sparse.csr_matrix, neighbours: np.ndarray, needed: int,
                 rng: np.random.Generator) -> tuple[sparse.csr_matrix, list[tuple[int, int]]]:
    """
    Draw `needed` synthetic rows.

    Draws per anchor are spread evenly (the surplus goes to anchors picked
    without replacement); rows are generated anchor-ascending, draw-ascending.
    """
    n, k = neighbours.shape
    per_anchor = np.full(n, needed // n, dtype=np.int64)
    surplus = needed % n
    if surplus:
        per_anchor[np.sort(rng.choice(n, size=surplus, replace=False))] += 1

    rows, pairs = [], []
    for anchor in range(n):
        x_i = class_X[anchor]
        for _ in range(per_anchor[anchor]):
            nn = int(neighbours[anchor, rng.integers(k)])
            lam = rng.random()
            rows.append(x_i + lam * (class_X[nn] - x_i))
            pairs.append((anchor, nn))
    return sparse.vstack(rows, format="csr"), pairs
