"""
Run Manifest
Records what a command did: config snapshot, seeds, content hashes of inputs
and outputs, artifact schema versions and wall-clock timings.
"""

import logging
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

from core.errors import ArtifactIOError
from core.schema_validator import validate_run_manifest
from core.utils import RNG_NAME, canonical_json, sha256_file

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1
MANIFEST_SUFFIX = ".manifest.json"


@dataclass
class RunManifest:
    command: str
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    schema_versions: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def record_input(self, path: str) -> None:
        self.inputs[path] = _hash_or_fail(path)

    def record_output(self, path: str) -> None:
        self.outputs[path] = _hash_or_fail(path)

    def record_seed(self, name: str, seed: int) -> None:
        self.seeds[name] = {"seed": int(seed), "rng": RNG_NAME}

    @contextmanager
    def timed(self, stage: str):
        """Accumulate wall-clock seconds spent in a stage."""
        start_time = time.time()
        try:
            yield
        finally:
            self.timings[stage] = self.timings.get(stage, 0.0) + (time.time() - start_time)

    def to_dict(self) -> dict:
        data = {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings": {k: round(v, 6) for k, v in self.timings.items()},
        }
        if self.schema_versions:
            data["config"] = dict(self.config, schema_versions=self.schema_versions)
        validate_run_manifest(data)
        return data

    def write(self, path: Optional[str]) -> None:
        """Write the manifest to `path`, or log it when no path is given."""
        text = canonical_json(self.to_dict())
        if path is None:
            logger.info("Run manifest:\n%s", text)
            return
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        except OSError as e:
            raise ArtifactIOError(f"Cannot write manifest {path}: {e}")


def _hash_or_fail(path: str) -> str:
    try:
        return sha256_file(path)
    except OSError as e:
        raise ArtifactIOError(f"Cannot hash {path}: {e}")


def default_manifest_path(out: Optional[str]) -> Optional[str]:
    """`<out>.manifest.json` next to the command's main output; None when there is no output file."""
    if not out:
        return None
    return out + MANIFEST_SUFFIX


def same_paths(a: str, b: str) -> bool:
    """True when two paths name the same file (existing or not)."""
    return os.path.realpath(a) == os.path.realpath(b)
