import hashlib
import json
import os
from typing import Any

import numpy as np


def get_unique_filepath(filepath: str) -> str:
    """
    Checks if a file exists at the given path.
    If it does, appends a counter to the filename (preserves extension)
    to generate a unique path.

    Example: 'state.npz' -> 'state_1.npz' -> 'state_2.npz'
    """
    if not os.path.exists(filepath):
        return filepath

    base, ext = os.path.splitext(filepath)
    counter = 1

    while os.path.exists(f"{base}_{counter}{ext}"):
        counter += 1

    return f"{base}_{counter}{ext}"


def ensure_parent_dir(filepath: str):
    output_dir = os.path.dirname(filepath)
    if output_dir and not os.path.exists(output_dir):
        os.makedirs(output_dir)


def load_json(path: str) -> Any:
    """
    Reads a JSON document.

    Raises:
        FileNotFoundError: If the file does not exist.
        json.JSONDecodeError: If the file is not valid JSON.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Input file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def json_digest(doc: Any) -> str:
    """sha256 of the canonical (sorted, compact) JSON encoding of doc."""
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def complex_from_json(obj: Any) -> np.ndarray:
    """
    Decodes nested lists whose innermost level is [re, im] pairs.

    Example: [[0.6, 0], [0, 0.8]] -> array([0.6+0j, 0+0.8j])
    """
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim == 0:
        return arr.astype(np.complex128)
    if arr.shape[-1] != 2:
        raise ValueError(f"Expected [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def complex_to_json(arr: np.ndarray) -> Any:
    arr = np.asarray(arr, dtype=np.complex128)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()
