"""
Utility Functions
Helper functions for text cleanup, hashing, canonical JSON and seeded RNG streams.
"""

import hashlib
import json
import re
import unicodedata

import numpy as np

# Name recorded in artifacts next to every seed
RNG_NAME = "numpy.PCG64"

_UINT64_MASK = (1 << 64) - 1


def preprocess_ynote_text(text: str) -> str:
    """
    Clean a YNote string before tokenization.
    
    Args:
        text: Raw YNote text (may contain line breaks or spaces from transcription)
        
    Returns:
        Text with unicode normalized to NFKC and all whitespace removed
        
    Example:
        "G402 E508\\nC516" → "G402E508C516"
    """
    if not isinstance(text, str):
        return ""
    text = unicodedata.normalize("NFKC", text)
    return re.sub(r"\s+", "", text)


def canonical_json(data) -> str:
    """
    Serialize to JSON with stable key order so equal inputs give equal bytes.
    
    Args:
        data: JSON-compatible object
        
    Returns:
        JSON text terminated by a newline
    """
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def sha256_text(text: str) -> str:
    """Hex sha256 of UTF-8 text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str) -> str:
    """Hex sha256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def derive_seed(seed: int, stream: int) -> int:
    """
    Derive an independent per-item seed as seed XOR stream.
    
    Parallel and serial runs draw from the same per-item streams, so
    output does not depend on scheduling.
    
    Args:
        seed: Base seed (unsigned 64-bit)
        stream: Item index (e.g. song index)
        
    Returns:
        Unsigned 64-bit seed
    """
    return (int(seed) ^ int(stream)) & _UINT64_MASK


def make_rng(seed: int) -> np.random.Generator:
    """Create the project's seeded generator (see RNG_NAME)."""
    return np.random.Generator(np.random.PCG64(int(seed) & _UINT64_MASK))
