"""
Schema Validator
Enforces strict layouts for model artifacts, evaluation reports, generator configs and run manifests.
"""

import math
from typing import Optional

from core.errors import DataError, InvalidConfig
from core.ynote import PITCH_LETTERS


class SchemaValidationError(DataError):
    """Raised when a structured document does not match its schema."""
    pass


class GeneratorConfigError(InvalidConfig):
    """Raised when a generator config has unknown keys or invalid values."""
    pass


def _check_keys(data: dict, required: set, optional: set, where: str,
                error: type = SchemaValidationError) -> None:
    """
    Check a dict has every required key and nothing outside required | optional.

    Raises:
        error (SchemaValidationError by default): On missing or extra keys
    """
    if not isinstance(data, dict):
        raise error(f"{where} must be a dictionary")
    data_keys = set(data.keys())
    missing_keys = required - data_keys
    extra_keys = data_keys - required - optional
    if missing_keys:
        raise error(f"Missing required keys in {where}: {sorted(missing_keys)}")
    if extra_keys:
        raise error(f"Extra keys found in {where}: {sorted(extra_keys)}")


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_model_artifact(data: dict) -> bool:
    """
    Validate a model artifact.

    Args:
        data: Parsed artifact JSON

    Returns:
        True if valid

    Raises:
        SchemaValidationError: If the layout is invalid

    Expected schema:
    {
        "schema_version": 1,
        "artifact": "ynote-ovr-model",
        "classes": [{"label": 0, "name": "Native"}, ...],
        "coef": [[...], ...],
        "intercept": [...],
        "vectorizer": {"config": {}, "n_docs_fitted": 0, "entries": []},
        "train_config": {},
        "solver": "",
        "rng": "",
        "seed": 42,
        "provenance": {},
        "hashes": {"vocabulary": "", "coefficients": ""}
    }
    """
    required_keys = {
        "schema_version", "artifact", "classes", "coef", "intercept", "vectorizer",
        "train_config", "solver", "rng", "seed", "provenance", "hashes"
    }
    _check_keys(data, required_keys, set(), "model artifact")

    if data["schema_version"] != 1:
        raise SchemaValidationError(f"Unsupported schema_version: {data['schema_version']!r}")

    if data["artifact"] != "ynote-ovr-model":
        raise SchemaValidationError(f"Not a model artifact: {data['artifact']!r}")

    if not isinstance(data["classes"], list) or len(data["classes"]) < 2:
        raise SchemaValidationError("'classes' must be a list of at least 2 entries")
    for idx, entry in enumerate(data["classes"]):
        _check_keys(entry, {"label", "name"}, set(), f"classes[{idx}]")
        if not isinstance(entry["label"], int):
            raise SchemaValidationError(f"classes[{idx}]['label'] must be an integer")

    if not isinstance(data["coef"], list) or len(data["coef"]) != len(data["classes"]):
        raise SchemaValidationError("'coef' must have one row per class")
    for idx, row in enumerate(data["coef"]):
        if not isinstance(row, list) or not all(_is_number(v) for v in row):
            raise SchemaValidationError(f"coef[{idx}] must be a list of numbers")

    if not isinstance(data["intercept"], list) or len(data["intercept"]) != len(data["classes"]):
        raise SchemaValidationError("'intercept' must have one value per class")

    vectorizer = data["vectorizer"]
    _check_keys(vectorizer, {"config", "n_docs_fitted", "entries"}, set(), "vectorizer")
    _check_keys(
        vectorizer["config"],
        {"ngram_min", "ngram_max", "max_features", "min_df", "max_df", "case_sensitive"},
        set(),
        "vectorizer config",
    )
    if not isinstance(vectorizer["entries"], list):
        raise SchemaValidationError("'vectorizer.entries' must be a list")
    for idx, entry in enumerate(vectorizer["entries"]):
        _check_keys(entry, {"index", "ngram", "doc_freq", "idf"}, set(), f"vectorizer.entries[{idx}]")

    if not isinstance(data["train_config"], dict):
        raise SchemaValidationError("'train_config' must be a dictionary")

    if not isinstance(data["provenance"], dict):
        raise SchemaValidationError("'provenance' must be a dictionary")

    _check_keys(data["hashes"], {"vocabulary", "coefficients"}, set(), "hashes")

    return True


def validate_eval_report(data: dict) -> bool:
    """
    Validate a serialized evaluation report.

    Args:
        data: Report dictionary

    Returns:
        True if valid

    Raises:
        SchemaValidationError: If the layout is invalid

    Expected schema:
    {
        "schema_version": 1,
        "classes": [],
        "per_class": [{"label", "name", "precision", "recall", "f1", "support"}],
        "weighted_avg": {"precision", "recall", "f1", "support"},
        "accuracy": 0.0,
        "confusion_matrix": {"raw": [], "normalized": []},
        "roc_auc": {"per_class": {}, "micro": 0.0, "macro": 0.0},   (optional)
        "zero_division": []
    }
    """
    required_keys = {
        "schema_version", "classes", "per_class", "weighted_avg", "accuracy",
        "confusion_matrix", "zero_division"
    }
    _check_keys(data, required_keys, {"roc_auc"}, "evaluation report")

    for idx, row in enumerate(data["per_class"]):
        _check_keys(row, {"label", "name", "precision", "recall", "f1", "support"}, set(), f"per_class[{idx}]")
        for metric in ("precision", "recall", "f1"):
            if not (_is_number(row[metric]) and 0.0 <= row[metric] <= 1.0):
                raise SchemaValidationError(f"per_class[{idx}]['{metric}'] must be in [0, 1]")

    _check_keys(data["weighted_avg"], {"precision", "recall", "f1", "support"}, set(), "weighted_avg")
    _check_keys(data["confusion_matrix"], {"raw", "normalized"}, set(), "confusion_matrix")

    if not (_is_number(data["accuracy"]) and 0.0 <= data["accuracy"] <= 1.0):
        raise SchemaValidationError("'accuracy' must be in [0, 1]")

    if "roc_auc" in data:
        _check_keys(data["roc_auc"], {"per_class", "micro", "macro"}, set(), "roc_auc")

    return True


def _check_number(value, where: str, low: float, high: float,
                  low_open: bool = False, high_open: bool = False) -> None:
    if not _is_number(value):
        raise GeneratorConfigError(f"{where} must be a number, got {value!r}")
    if value < low or value > high or (low_open and value == low) or (high_open and value == high):
        left, right = "(" if low_open else "[", ")" if high_open else "]"
        raise GeneratorConfigError(f"{where} must be in {left}{low}, {high}{right}, got {value}")


def _check_int(value, where: str, low: int, high: Optional[int] = None) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        raise GeneratorConfigError(f"{where} must be an integer, got {value!r}")
    if value < low or (high is not None and value > high):
        bound = f">= {low}" if high is None else f"in [{low}, {high}]"
        raise GeneratorConfigError(f"{where} must be {bound}, got {value}")


def _check_class_entry(entry: dict, where: str) -> None:
    optional_keys = {
        "rest_prob", "repeat_prob", "scale", "markov_order", "anneal", "seed", "rules"
    }
    _check_keys(entry, {"class", "count", "length_range"}, optional_keys, where, GeneratorConfigError)
    if entry["class"] not in {"native", "algorithm", "llm"}:
        raise GeneratorConfigError(f"{where}['class'] must be native, algorithm or llm")
    _check_int(entry["count"], f"{where}['count']", 0)
    length_range = entry["length_range"]
    if (not isinstance(length_range, list) or len(length_range) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in length_range)
            or not 2 <= length_range[0] <= length_range[1]):
        raise GeneratorConfigError(f"{where}['length_range'] must be [min, max] with 2 <= min <= max")

    for name in ("rest_prob", "repeat_prob"):
        if name in entry:
            _check_number(entry[name], f"{where}['{name}']", 0.0, 1.0)
    if "seed" in entry:
        _check_int(entry["seed"], f"{where}['seed']", 0)
    if "markov_order" in entry:
        _check_int(entry["markov_order"], f"{where}['markov_order']", 1, 2)
    if "scale" in entry:
        scale = entry["scale"]
        if not isinstance(scale, dict) or not scale:
            raise GeneratorConfigError(f"{where}['scale'] must be a non-empty letter -> weight mapping")
        for letter, weight in scale.items():
            if letter not in PITCH_LETTERS:
                raise GeneratorConfigError(f"{where}['scale'] has unknown pitch letter {letter!r}")
            _check_number(weight, f"{where}['scale'][{letter!r}]", 0.0, math.inf)

    if "anneal" in entry:
        anneal = entry["anneal"]
        at = f"{where}['anneal']"
        _check_keys(anneal, set(), {"initial_temp", "cooling", "steps"}, at, GeneratorConfigError)
        if "initial_temp" in anneal:
            _check_number(anneal["initial_temp"], f"{at}['initial_temp']", 0.0, math.inf, low_open=True)
        if "cooling" in anneal:
            _check_number(anneal["cooling"], f"{at}['cooling']", 0.0, 1.0, low_open=True, high_open=True)
        if "steps" in anneal:
            _check_int(anneal["steps"], f"{at}['steps']", 1)

    if "rules" in entry:
        rules = entry["rules"]
        at = f"{where}['rules']"
        _check_keys(rules, set(), {"allowed_letters", "max_leap", "forbid_rests"}, at, GeneratorConfigError)
        if "allowed_letters" in rules:
            letters = rules["allowed_letters"]
            if (not isinstance(letters, list) or not letters
                    or not all(isinstance(l, str) and l in PITCH_LETTERS for l in letters)):
                raise GeneratorConfigError(f"{at}['allowed_letters'] must be a non-empty list of pitch letters")
        if "max_leap" in rules:
            _check_int(rules["max_leap"], f"{at}['max_leap']", 0)
        if "forbid_rests" in rules and not isinstance(rules["forbid_rests"], bool):
            raise GeneratorConfigError(f"{at}['forbid_rests'] must be true or false")


def validate_generator_config(data: dict) -> bool:
    """
    Validate a corpus generator config, including value types and ranges.

    Args:
        data: Generator config dictionary

    Returns:
        True if valid

    Raises:
        GeneratorConfigError: If the layout or a value is invalid

    Expected schema:
    {
        "seed": 42,
        "reference_songs": 60,
        "classes": [
            {"class": "native", "count": 300, "length_range": [32, 64], ...}
        ]
    }
    """
    _check_keys(data, {"classes"}, {"seed", "reference_songs"}, "generator config", GeneratorConfigError)
    if "seed" in data:
        _check_int(data["seed"], "generator config 'seed'", 0)
    if "reference_songs" in data:
        _check_int(data["reference_songs"], "generator config 'reference_songs'", 1)

    if not isinstance(data["classes"], list) or not data["classes"]:
        raise GeneratorConfigError("'classes' must be a non-empty list")
    for idx, entry in enumerate(data["classes"]):
        _check_class_entry(entry, f"classes[{idx}]")

    return True


def validate_run_manifest(data: dict) -> bool:
    """
    Validate a run manifest.

    Raises:
        SchemaValidationError: If the layout is invalid
    """
    required_keys = {
        "schema_version", "command", "config", "seeds", "inputs", "outputs", "timings"
    }
    _check_keys(data, required_keys, set(), "run manifest")
    for section in ("config", "seeds", "inputs", "outputs", "timings"):
        if not isinstance(data[section], dict):
            raise SchemaValidationError(f"'{section}' must be a dictionary")
    return True


def strip_timings(data: dict) -> dict:
    """
    Remove timings from a manifest so reruns can be compared.

    Args:
        data: Manifest dictionary

    Returns:
        Manifest without timings (new dict, original unchanged)
    """
    if "timings" in data:
        data = data.copy()
        del data["timings"]
    return data
