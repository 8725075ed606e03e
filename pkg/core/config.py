"""
Configuration
Environment defaults (via .env) and structured JSON config files.
"""

import json
import os
from typing import Any, Optional

from core.errors import ArtifactIOError, InvalidConfig

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass  # dotenv not required if env vars are set directly


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise InvalidConfig(f"{name} must be an integer, got {raw!r}")


DEFAULT_SEED = _env_int("YNOTE_SEED", 42)
DEFAULT_N_JOBS = _env_int("YNOTE_N_JOBS", 1)
LOG_LEVEL = os.getenv("YNOTE_LOG_LEVEL", "WARNING").upper()

# Sections accepted in a --config file
CONFIG_SECTIONS = {"vectorizer", "smote", "train", "split", "generator"}

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
RESOURCES_DIR = os.path.join(PROJECT_ROOT, "resources")


def load_resource(name: str) -> dict:
    """
    Load a JSON file from the resources directory.
    
    Args:
        name: File name inside resources/ (e.g. "generator_config.json")
        
    Returns:
        Parsed JSON dictionary
        
    Raises:
        ArtifactIOError: If the file is missing or not valid JSON
    """
    return load_json_file(os.path.join(RESOURCES_DIR, name))


def load_json_file(path: str) -> dict:
    """
    Read a JSON object from disk.
    
    Args:
        path: File path
        
    Returns:
        Parsed JSON dictionary
        
    Raises:
        ArtifactIOError: If the file cannot be read, is not JSON, or is not an object
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ArtifactIOError(f"Cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise ArtifactIOError(f"{path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ArtifactIOError(f"{path} must contain a JSON object")
    return data


def load_run_config(path: Optional[str]) -> dict[str, dict[str, Any]]:
    """
    Load a --config file and check its top-level sections.
    
    Args:
        path: Config file path, or None for an empty config
        
    Returns:
        Mapping of section name to its key/value overrides
        
    Raises:
        InvalidConfig: If an unknown section is present or a section is not an object
    """
    if path is None:
        return {}
    data = load_json_file(path)
    unknown = set(data) - CONFIG_SECTIONS
    if unknown:
        raise InvalidConfig(f"Unknown config sections: {sorted(unknown)}")
    for section, values in data.items():
        if not isinstance(values, dict):
            raise InvalidConfig(f"Config section '{section}' must be an object")
    return data


def merge_overrides(base: dict, *layers: Optional[dict]) -> dict:
    """
    Merge override layers onto a base dict; None values in a layer are skipped.
    
    Args:
        base: Default values
        *layers: Later layers win (config file, then CLI flags)
        
    Returns:
        New merged dictionary
    """
    merged = dict(base)
    for layer in layers:
        if not layer:
            continue
        for key, value in layer.items():
            if value is not None:
                merged[key] = value
    return merged


def build_section(cls, section: str, *layers: Optional[dict]):
    """
    Instantiate a config dataclass from layered overrides.

    Args:
        cls: Frozen config dataclass (VectorizerConfig, TrainConfig, ...)
        section: Section name for error messages
        *layers: Override dicts, later layers win

    Returns:
        cls instance (its __post_init__ validates the values)

    Raises:
        InvalidConfig: If a layer names a field the dataclass does not have
    """
    fields = set(cls.__dataclass_fields__)
    for layer in layers:
        unknown = set(layer or {}) - fields
        if unknown:
            raise InvalidConfig(f"Unknown keys in '{section}' config: {sorted(unknown)}")
    values = merge_overrides({}, *layers)
    try:
        return cls(**values)
    except TypeError as e:
        raise InvalidConfig(f"Invalid '{section}' config: {e}")


# Source classes, in label order
CLASS_NAMES = {0: "Native", 1: "Algorithm", 2: "LLM"}


def class_name(label: int) -> str:
    """Display name for a label (falls back to the number for unknown labels)."""
    return CLASS_NAMES.get(int(label), str(label))
