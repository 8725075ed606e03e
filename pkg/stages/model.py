"""
One-vs-Rest Logistic Regression
Train and apply per-class L2-regularized binary logistic models over TF-IDF rows,
and rank their coefficients into n-gram fingerprints.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy import optimize, sparse
from scipy.special import expit, softmax

from core.config import class_name, load_json_file
from core.errors import ArtifactIOError, DataError, DegenerateDataError, InvalidConfig
from core.schema_validator import validate_model_artifact
from core.utils import RNG_NAME, canonical_json, make_rng, sha256_text
from stages.features import NGram, Vocabulary

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ARTIFACT_KIND = "ynote-ovr-model"
SOLVER = "scipy.optimize.L-BFGS-B"
RANDOM_INIT_SCALE = 0.01


class SingleClassInput(DegenerateDataError):
    """Raised when training labels contain fewer than two classes."""
    pass


class DimensionMismatch(DataError):
    """Raised when feature rows, labels or coefficient widths disagree."""
    pass


class UnknownClass(InvalidConfig):
    """Raised when a label is not one of the model's classes."""
    pass


class ClassWeight(str, Enum):
    BALANCED = "balanced"
    UNIFORM = "uniform"


class Sign(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    ABSOLUTE = "absolute"


@dataclass(frozen=True)
class TrainConfig:
    regularization_strength: float = 1.0
    max_iter: int = 2000
    tol: float = 1e-6
    class_weight: str = ClassWeight.BALANCED.value
    seed: int = 42
    init: str = "zeros"
    n_jobs: int = 1

    def __post_init__(self):
        if not self.regularization_strength > 0:
            raise InvalidConfig(f"regularization_strength must be positive, got {self.regularization_strength}")
        if self.max_iter < 1:
            raise InvalidConfig(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0:
            raise InvalidConfig(f"tol must be positive, got {self.tol}")
        if self.class_weight not in {w.value for w in ClassWeight}:
            raise InvalidConfig(f"class_weight must be 'balanced' or 'uniform', got {self.class_weight!r}")
        if self.init not in {"zeros", "random"}:
            raise InvalidConfig(f"init must be 'zeros' or 'random', got {self.init!r}")
        if self.seed < 0:
            raise InvalidConfig(f"seed must be unsigned, got {self.seed}")

    def to_dict(self) -> dict:
        data = asdict(self)
        # parallelism never changes results, keep it out of artifacts
        data.pop("n_jobs")
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


@dataclass
class FitReport:
    label: int
    iterations: int
    loss: float
    grad_norm: float
    converged: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OvrModel:
    """
    Fitted One-vs-Rest model.

    Attributes:
        classes: Labels in row order of coef
        coef: (n_classes, n_features) weights
        intercept: (n_classes,) biases
        vocabulary: Column names; None for hand-built models
        train_config: Settings used to fit
        fit_reports: Per-class convergence details
        provenance: Extra pipeline settings recorded in the artifact (SMOTE etc.)
    """
    classes: tuple[int, ...]
    coef: np.ndarray
    intercept: np.ndarray
    vocabulary: Optional[Vocabulary] = None
    train_config: TrainConfig = field(default_factory=TrainConfig)
    fit_reports: list[FitReport] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(class_name(c) for c in self.classes)

    @property
    def n_features(self) -> int:
        return int(self.coef.shape[1])

    @property
    def vocab_fingerprint(self) -> str:
        return self.vocabulary.fingerprint() if self.vocabulary is not None else ""

    def class_row(self, label: int) -> int:
        try:
            return self.classes.index(int(label))
        except ValueError:
            raise UnknownClass(f"Class {label} is not one of {list(self.classes)}")


class BinaryLogisticObjective:
    """
    Weighted L2-regularized logistic loss for one binary problem.

        f(w, b) = sum_i s_i * log(1 + exp(-t_i * (w.x_i + b))) + ||w||^2 / (2C)

    t_i in {-1, +1}; the intercept b is not penalized. Callable with the
    packed parameter vector [w..., b], returning (loss, gradient) so it can
    be handed straight to scipy.optimize.minimize(jac=True).
    """

    def __init__(self, X, targets: np.ndarray, sample_weight: np.ndarray, C: float):
        self.X = sparse.csr_matrix(X, dtype=np.float64)
        self.t = np.asarray(targets, dtype=np.float64)
        self.s = np.asarray(sample_weight, dtype=np.float64)
        self.inv_C = 1.0 / C
        self.n_features = self.X.shape[1]

    def __call__(self, params: np.ndarray) -> tuple[float, np.ndarray]:
        w, b = params[:-1], params[-1]
        margin = self.t * (self.X @ w + b)

        loss = float(np.dot(self.s, np.logaddexp(0.0, -margin)) + 0.5 * self.inv_C * np.dot(w, w))

        dz = -self.t * self.s * expit(-margin)
        grad = np.empty_like(params)
        grad[:-1] = self.X.T @ dz + self.inv_C * w
        grad[-1] = dz.sum()
        return loss, grad


def compute_sample_weights(y: np.ndarray, mode: str) -> np.ndarray:
    """
    Per-sample weights.

    Args:
        y: Labels
        mode: "balanced" → n_samples / (n_classes * count(class of sample)); "uniform" → 1

    Returns:
        Weight per sample
    """
    y = np.asarray(y)
    if ClassWeight(mode) is ClassWeight.UNIFORM:
        return np.ones(y.shape[0], dtype=np.float64)
    classes, inverse, counts = np.unique(y, return_inverse=True, return_counts=True)
    per_class = y.shape[0] / (classes.size * counts.astype(np.float64))
    return per_class[inverse]


def _fit_binary(X, targets: np.ndarray, weights: np.ndarray, config: TrainConfig,
                label: int, row: int) -> tuple[np.ndarray, FitReport]:
    objective = BinaryLogisticObjective(X, targets, weights, config.regularization_strength)
    size = objective.n_features + 1

    if config.init == "random":
        x0 = make_rng(config.seed + row).normal(0.0, RANDOM_INIT_SCALE, size=size)
    else:
        x0 = np.zeros(size, dtype=np.float64)

    # L-BFGS-B checks the max-norm; this bound implies ||grad||_2 <= tol
    gtol = config.tol / math.sqrt(size)
    result = optimize.minimize(
        objective, x0, jac=True, method="L-BFGS-B",
        options={"maxiter": config.max_iter, "gtol": gtol, "ftol": 0.0, "maxcor": 20},
    )
    _, grad = objective(result.x)
    grad_norm = float(np.linalg.norm(grad))
    report = FitReport(label=label, iterations=int(result.nit), loss=float(result.fun),
                       grad_norm=grad_norm, converged=grad_norm <= config.tol)
    if not report.converged:
        logger.warning("Class %s: stopped after %d iterations with gradient norm %.3g (tol %.1g)",
                       class_name(label), report.iterations, grad_norm, config.tol)
    else:
        logger.info("Class %s: converged in %d iterations", class_name(label), report.iterations)
    return result.x, report


def train_ovr(X, y: Sequence[int], config: TrainConfig,
              vocabulary: Optional[Vocabulary] = None) -> OvrModel:
    """
    Fit one binary logistic model per class against all others.

    Args:
        X: Feature matrix, rows aligned with y
        y: Labels
        config: Training settings
        vocabulary: Column names to attach (must match X's width)

    Returns:
        OvrModel with one coefficient row per class present in y

    Raises:
        SingleClassInput: Fewer than two distinct labels
        DimensionMismatch: Row/label counts or vocabulary width disagree
    """
    X = sparse.csr_matrix(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows but y has {y.shape[0]} labels")
    if vocabulary is not None and len(vocabulary) != X.shape[1]:
        raise DimensionMismatch(f"X has {X.shape[1]} columns but vocabulary has {len(vocabulary)}")

    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise SingleClassInput(f"Training needs at least 2 classes, got {list(classes)}")

    weights = compute_sample_weights(y, config.class_weight)
    jobs = [
        delayed(_fit_binary)(X, np.where(y == label, 1.0, -1.0), weights, config, label, row)
        for row, label in enumerate(classes)
    ]
    fitted = Parallel(n_jobs=config.n_jobs, prefer="threads")(jobs)

    params = np.vstack([p for p, _ in fitted])
    return OvrModel(
        classes=classes,
        coef=params[:, :-1].copy(),
        intercept=params[:, -1].copy(),
        vocabulary=vocabulary,
        train_config=config,
        fit_reports=[r for _, r in fitted],
    )


def decision_function(model: OvrModel, X) -> np.ndarray:
    """Raw per-class scores coef_c . x + intercept_c, shape (n, n_classes)."""
    if sparse.issparse(X):
        X = sparse.csr_matrix(X, dtype=np.float64)
    else:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"Input has {X.shape[1]} features, model expects {model.n_features}")
    return np.asarray(X @ model.coef.T) + model.intercept


def predict_proba(model: OvrModel, X) -> np.ndarray:
    """
    Normalized OvR probabilities: sigmoid(score_c) / sum_j sigmoid(score_j).

    Args:
        model: Fitted model
        X: One row (1-D) or a batch (2-D / sparse)

    Returns:
        (n_classes,) for a 1-D input, else (n, n_classes); rows sum to 1

    Raises:
        DimensionMismatch: Feature width differs from the model
    """
    single = not sparse.issparse(X) and np.ndim(X) == 1
    scores = decision_function(model, X)
    # log sigmoid, then normalize in log space so tiny sigmoids never divide by zero
    probs = softmax(-np.logaddexp(0.0, -scores), axis=1)
    return probs[0] if single else probs


def predict(model: OvrModel, X):
    """
    Predicted label(s): argmax of predict_proba, ties to the lowest class index.

    Returns:
        An int for a 1-D input, else an array of labels
    """
    probs = predict_proba(model, X)
    labels = np.asarray(model.classes)
    if probs.ndim == 1:
        return int(labels[int(np.argmax(probs))])
    return labels[np.argmax(probs, axis=1)]


def top_features(model: OvrModel, label: int, k: int,
                 sign: Sign = Sign.POSITIVE) -> list[tuple[NGram, float]]:
    """
    Rank a class's n-grams by coefficient.

    Args:
        model: Fitted model with a vocabulary
        label: Class label
        k: Number of features (0 → empty list)
        sign: POSITIVE (largest first), NEGATIVE (most negative first) or
            ABSOLUTE (largest magnitude, either sign)

    Returns:
        Up to k (NGram, coefficient) pairs; ties broken by n-gram text

    Raises:
        UnknownClass: Label not in the model
        InvalidConfig: Model carries no vocabulary
    """
    row = model.class_row(label)
    if model.vocabulary is None:
        raise InvalidConfig("Model has no vocabulary attached; cannot name features")
    if k <= 0:
        return []

    sign = Sign(sign)
    coef = model.coef[row]
    terms = model.vocabulary.terms
    if sign is Sign.POSITIVE:
        ranked = sorted((i for i in range(coef.size) if coef[i] > 0), key=lambda i: (-coef[i], terms[i]))
    elif sign is Sign.NEGATIVE:
        ranked = sorted((i for i in range(coef.size) if coef[i] < 0), key=lambda i: (coef[i], terms[i]))
    else:
        ranked = sorted((i for i in range(coef.size) if coef[i] != 0), key=lambda i: (-abs(coef[i]), terms[i]))
    return [(NGram(terms[i]), float(coef[i])) for i in ranked[:k]]


def _coefficients_hash(coef: np.ndarray, intercept: np.ndarray) -> str:
    return sha256_text(canonical_json({"coef": coef.tolist(), "intercept": intercept.tolist()}))


def model_to_artifact(model: OvrModel) -> dict:
    """Build the versioned artifact document (stable, timing-free)."""
    if model.vocabulary is None:
        raise InvalidConfig("Only models with a vocabulary can be saved")
    return {
        "schema_version": SCHEMA_VERSION,
        "artifact": ARTIFACT_KIND,
        "classes": [{"label": c, "name": class_name(c)} for c in model.classes],
        "coef": model.coef.tolist(),
        "intercept": model.intercept.tolist(),
        "vectorizer": model.vocabulary.to_dict(),
        "train_config": model.train_config.to_dict(),
        "solver": SOLVER,
        "rng": RNG_NAME,
        "seed": model.train_config.seed,
        "provenance": model.provenance,
        "hashes": {
            "vocabulary": model.vocab_fingerprint,
            "coefficients": _coefficients_hash(model.coef, model.intercept),
        },
    }


def model_from_artifact(data: dict) -> OvrModel:
    """Rebuild an OvrModel from a validated artifact document."""
    vocabulary = Vocabulary.from_dict(data["vectorizer"])
    model = OvrModel(
        classes=tuple(int(c["label"]) for c in data["classes"]),
        coef=np.asarray(data["coef"], dtype=np.float64),
        intercept=np.asarray(data["intercept"], dtype=np.float64),
        vocabulary=vocabulary,
        train_config=TrainConfig.from_dict(data["train_config"]),
        provenance=dict(data.get("provenance", {})),
    )
    if model.coef.shape != (len(model.classes), len(vocabulary)):
        raise DimensionMismatch(
            f"Coefficient shape {model.coef.shape} does not match "
            f"{len(model.classes)} classes x {len(vocabulary)} n-grams"
        )
    if model.vocab_fingerprint != data["hashes"]["vocabulary"]:
        raise DataError("Vocabulary hash mismatch: artifact is corrupted or edited")
    if _coefficients_hash(model.coef, model.intercept) != data["hashes"]["coefficients"]:
        raise DataError("Coefficient hash mismatch: artifact is corrupted or edited")
    return model


def save_model(model: OvrModel, path: str) -> str:
    """
    Write the model artifact as canonical JSON.

    Args:
        model: Fitted model with vocabulary
        path: Output file

    Returns:
        sha256 of the written text

    Raises:
        ArtifactIOError: If the file cannot be written
    """
    text = canonical_json(model_to_artifact(model))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise ArtifactIOError(f"Cannot write model to {path}: {e}")
    return sha256_text(text)


def load_model(path: str) -> OvrModel:
    """
    Read and validate a model artifact.

    Raises:
        ArtifactIOError: Unreadable file or invalid JSON
        SchemaValidationError: Artifact layout is wrong
        DataError: Content hashes do not match
    """
    data = load_json_file(path)
    validate_model_artifact(data)
    return model_from_artifact(data)
