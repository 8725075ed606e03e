"""
Pipeline Orchestrator
Runs the stages in order: vocabulary → TF-IDF → SMOTE → OvR training,
plus held-out evaluation and leakage-free k-fold cross-validation.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from core.utils import preprocess_ynote_text
from core.ynote import TokenizePolicy, tokenize
from stages.corpus import LabeledSong
from stages.evaluation import EvalReport, accuracy_score, cross_validation_summary, evaluate_scores, stratified_kfold
from stages.features import VectorizerConfig, Vocabulary, fit_vocabulary, transform_corpus
from stages.model import OvrModel, TrainConfig, predict, predict_proba, train_ovr
from stages.resample import ResampleSummary, SmoteConfig, smote_resample

logger = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: OvrModel
    resample: Optional[ResampleSummary]
    n_train: int
    zero_rows: list[int] = field(default_factory=list)
    val_accuracy: Optional[float] = None

    def summary(self) -> dict:
        """Training summary: per-class convergence and post-SMOTE class counts (timing-free)."""
        data = {
            "n_train": self.n_train,
            "vocabulary_size": self.model.n_features,
            "zero_vector_rows": len(self.zero_rows),
            "fit": [r.to_dict() for r in self.model.fit_reports],
            "smote": self.resample.to_dict() if self.resample is not None else None,
        }
        if self.val_accuracy is not None:
            data["val_accuracy"] = self.val_accuracy
        return data


def train_pipeline(train_songs: Sequence[LabeledSong], vectorizer: VectorizerConfig,
                   train_config: TrainConfig, smote: Optional[SmoteConfig] = None,
                   val_songs: Optional[Sequence[LabeledSong]] = None) -> TrainResult:
    """
    Fit a model on training songs only.

    Args:
        train_songs: Training split
        vectorizer: Vocabulary settings
        train_config: Solver settings
        smote: SMOTE settings, or None to skip resampling
        val_songs: Optional validation split, scored after training

    Returns:
        TrainResult with the fitted model and its summary data
    """
    sequences = [song.tokens for song in train_songs]
    y = np.asarray([song.label for song in train_songs], dtype=np.int64)

    vocabulary = fit_vocabulary(sequences, vectorizer)
    X, zero_rows = transform_corpus(sequences, vocabulary)

    summary = None
    if smote is not None:
        X, y, summary = smote_resample(X, y, smote)

    model = train_ovr(X, y, train_config, vocabulary=vocabulary)
    model.provenance = {
        "n_train_songs": len(train_songs),
        "smote": smote.to_dict() if smote is not None else None,
        "class_counts_after_resample": (
            summary.to_dict()["counts_after"] if summary is not None
            else {str(c): int(n) for c, n in zip(*np.unique(y, return_counts=True))}
        ),
    }

    result = TrainResult(model=model, resample=summary, n_train=len(train_songs), zero_rows=zero_rows)
    if val_songs:
        result.val_accuracy = accuracy_score(
            [song.label for song in val_songs], predict_songs(model, val_songs)
        )
        logger.info("Validation accuracy: %.4f", result.val_accuracy)
    return result


def featurize(model: OvrModel, songs: Sequence[LabeledSong]):
    """TF-IDF rows for songs under the model's vocabulary."""
    matrix, _ = transform_corpus([song.tokens for song in songs], model.vocabulary)
    return matrix


def predict_songs(model: OvrModel, songs: Sequence[LabeledSong]) -> np.ndarray:
    return np.atleast_1d(predict(model, featurize(model, songs)))


def classify_text(model: OvrModel, ynote: str,
                  policy: TokenizePolicy = TokenizePolicy.STRICT) -> tuple[int, np.ndarray]:
    """
    Classify one raw YNote string.

    Args:
        model: Fitted model
        ynote: YNote text (whitespace is stripped first)
        policy: Tokenize policy for a trailing partial token

    Returns:
        Tuple of (predicted label, probabilities in model.classes order)
    """
    seq = tokenize(preprocess_ynote_text(ynote), policy)
    if seq.remainder:
        logger.warning("Dropped trailing partial token %r", seq.remainder)
    matrix, _ = transform_corpus([seq], model.vocabulary)
    probs = predict_proba(model, matrix)[0]
    return int(model.classes[int(np.argmax(probs))]), probs


def evaluate_model(model: OvrModel, songs: Sequence[LabeledSong]) -> EvalReport:
    """Full held-out report (metrics, confusion matrices, ROC-AUC) over labeled songs."""
    X = featurize(model, songs)
    probs = predict_proba(model, X)
    y_pred = np.asarray(model.classes)[np.argmax(probs, axis=1)]
    y_true = [song.label for song in songs]
    return evaluate_scores(y_true, y_pred, probs, labels=list(model.classes))


@dataclass
class FoldResult:
    fold: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    vocabulary: Vocabulary
    accuracy: float


@dataclass
class CrossValidationResult:
    folds: list[FoldResult]
    mean: float
    std: float

    def to_dict(self) -> dict:
        return {
            "folds": [{"fold": f.fold, "n_train": int(f.train_idx.size), "n_test": int(f.test_idx.size),
                       "vocabulary_size": len(f.vocabulary), "accuracy": f.accuracy} for f in self.folds],
            "mean_accuracy": self.mean,
            "std_accuracy": self.std,
        }


def _run_fold(fold: int, songs: Sequence[LabeledSong], train_idx: np.ndarray, test_idx: np.ndarray,
              vectorizer: VectorizerConfig, train_config: TrainConfig,
              smote: Optional[SmoteConfig]) -> FoldResult:
    # everything is refit on the training part of the fold
    train_songs = [songs[i] for i in train_idx]
    held_out = [songs[i] for i in test_idx]
    result = train_pipeline(train_songs, vectorizer, train_config, smote)
    accuracy = accuracy_score([s.label for s in held_out], predict_songs(result.model, held_out))
    logger.info("Fold %d: accuracy %.4f (%d n-grams)", fold, accuracy, len(result.model.vocabulary))
    return FoldResult(fold=fold, train_idx=train_idx, test_idx=test_idx,
                      vocabulary=result.model.vocabulary, accuracy=accuracy)


def cross_validate(songs: Sequence[LabeledSong], k: int, seed: int, vectorizer: VectorizerConfig,
                   train_config: TrainConfig, smote: Optional[SmoteConfig] = None,
                   n_jobs: int = 1) -> CrossValidationResult:
    """
    Stratified k-fold cross-validation of the full pipeline.

    Vocabulary, SMOTE and model are fit per fold on that fold's training part.

    Returns:
        Per-fold results plus mean and population std of accuracy
    """
    y = [song.label for song in songs]
    folds = stratified_kfold(y, k, seed)
    everything = np.arange(len(songs))
    jobs = [
        delayed(_run_fold)(i, songs, np.setdiff1d(everything, test_idx), test_idx,
                           vectorizer, train_config, smote)
        for i, test_idx in enumerate(folds)
    ]
    results = Parallel(n_jobs=n_jobs, prefer="threads")(jobs)
    mean, std = cross_validation_summary([r.accuracy for r in results])
    return CrossValidationResult(folds=list(results), mean=mean, std=std)
