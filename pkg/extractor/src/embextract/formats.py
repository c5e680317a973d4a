"""Writers for the LEMB/LLAB binary formats and the JSON sidecar.

This is the whole contract with the training library: little-endian
containers with fixed headers, float32 row-major payloads, unit-norm
embedding rows. Implemented independently here on purpose; the reader on
the other side validates everything again.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC_MATRIX = b"LEMB"
MAGIC_LABELS = b"LLAB"
FORMAT_VERSION = 1

_MATRIX_HEADER = struct.Struct("<4sIQQ")
_LABELS_HEADER = struct.Struct("<4sQ")


def normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero embedding row")
    return x / norms


def write_matrix(path: str | Path, matrix: np.ndarray) -> None:
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
        raise ValueError(f"embedding matrix must be 2-d with >=1 row, >=2 dims, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("refusing to write non-finite embeddings")
    header = _MATRIX_HEADER.pack(MAGIC_MATRIX, FORMAT_VERSION, arr.shape[0], arr.shape[1])
    Path(path).write_bytes(header + arr.tobytes())


def write_labels(path: str | Path, labels: np.ndarray) -> None:
    arr = np.ascontiguousarray(labels, dtype="<u4")
    header = _LABELS_HEADER.pack(MAGIC_LABELS, arr.shape[0])
    Path(path).write_bytes(header + arr.tobytes())


def write_dataset(
    directory: str | Path,
    domain_name: str,
    embeddings: np.ndarray,
    labels: np.ndarray,
    class_names: list[str],
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix(directory / "images.lemb", embeddings)
    write_labels(directory / "labels.llab", labels)
    meta = {"domain_name": domain_name, "class_names": list(class_names)}
    (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def write_world_manifest(
    directory: str | Path,
    sources: list[str],
    target: str,
    has_target_dataset: bool,
    num_classes: int,
    dim: int,
) -> None:
    info = {
        "sources": sorted(sources),
        "target": target,
        "has_target_dataset": has_target_dataset,
        "num_classes": num_classes,
        "dim": dim,
    }
    path = Path(directory) / "world.json"
    path.write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
