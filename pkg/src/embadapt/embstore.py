"""Embedding data model and the LEMB/LLAB binary formats.

Everything downstream (training, transport, prediction) trades in the
types defined here. Storage is float32 little-endian; all later
arithmetic accumulates in float64. Rows are required to be unit-L2
within ``NORM_TOL`` at load time and are never silently renormalized.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC_MATRIX = b"LEMB"
MAGIC_LABELS = b"LLAB"
FORMAT_VERSION = 1
NORM_TOL = 1e-4

_MATRIX_HEADER = struct.Struct("<4sIQQ")
_LABELS_HEADER = struct.Struct("<4sQ")


class EmbStoreError(Exception):
    """Base class for embedding-store validation and format errors."""


class MagicError(EmbStoreError):
    pass


class VersionError(EmbStoreError):
    pass


class TruncationError(EmbStoreError):
    pass


class NormError(EmbStoreError):
    pass


class DimensionError(EmbStoreError):
    pass


class CountMismatchError(EmbStoreError):
    pass


class LabelRangeError(EmbStoreError):
    pass


@dataclass(frozen=True)
class EmbeddingMatrix:
    """A validated n x m block of unit-norm float32 embedding rows."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise DimensionError(f"expected a 2-d matrix, got ndim={arr.ndim}")
        if arr.shape[0] < 1:
            raise DimensionError("embedding matrix needs at least one row")
        if arr.shape[1] < 2:
            raise DimensionError("embedding dim must be >= 2")
        if not np.all(np.isfinite(arr)):
            raise EmbStoreError("embedding matrix contains non-finite entries")
        norms = np.linalg.norm(arr.astype(np.float64), axis=1)
        worst = np.abs(norms - 1.0).max()
        if worst > NORM_TOL:
            row = int(np.abs(norms - 1.0).argmax())
            raise NormError(
                f"row {row} has L2 norm {norms[row]:.6f} "
                f"(deviates from 1.0 by more than {NORM_TOL})"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def f64(self) -> np.ndarray:
        """Float64 working copy (all downstream arithmetic is f64)."""
        return self.data.astype(np.float64)


@dataclass(frozen=True)
class DomainDataset:
    """One source (or target) domain: embeddings, labels, class list."""

    domain_name: str
    embeddings: EmbeddingMatrix
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.uint32)
        if labels.ndim != 1:
            raise DimensionError("labels must be a 1-d array")
        if labels.shape[0] != self.embeddings.rows:
            raise CountMismatchError(
                f"{labels.shape[0]} labels for {self.embeddings.rows} embedding rows"
            )
        if len(self.class_names) < 1:
            raise CountMismatchError("class list is empty")
        if labels.size and labels.max() >= len(self.class_names):
            raise LabelRangeError(
                f"label {int(labels.max())} out of range for "
                f"{len(self.class_names)} classes"
            )
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class PromptBank:
    """Text embeddings: bare class names plus every domain/class composition."""

    class_text: EmbeddingMatrix
    composed_text: dict[str, EmbeddingMatrix]
    target_composed_text: EmbeddingMatrix
    target_name: str

    def __post_init__(self):
        n, m = self.class_text.rows, self.class_text.dim
        for name, mat in list(self.composed_text.items()) + [
            (self.target_name, self.target_composed_text)
        ]:
            if mat.dim != m:
                raise DimensionError(f"prompt matrix '{name}' has dim {mat.dim}, expected {m}")
            if mat.rows != n:
                raise CountMismatchError(
                    f"prompt matrix '{name}' has {mat.rows} rows for {n} classes"
                )

    @property
    def num_classes(self) -> int:
        return self.class_text.rows

    @property
    def dim(self) -> int:
        return self.class_text.dim

    @property
    def source_names(self) -> tuple[str, ...]:
        return tuple(self.composed_text.keys())


def write_matrix(path: str | Path, matrix: EmbeddingMatrix) -> None:
    """Write a validated embedding matrix; inverse of :func:`read_matrix`."""
    write_array(path, matrix.data)


def read_matrix(path: str | Path) -> EmbeddingMatrix:
    """Read and fully validate an embedding matrix (magic, version, norms)."""
    return EmbeddingMatrix(read_array(path))


def write_array(path: str | Path, data: np.ndarray) -> None:
    """Write a raw 2-d float array in the LEMB container.

    Used for checkpoints as well as embeddings; the unit-norm invariant
    belongs to :class:`EmbeddingMatrix`, not to the container.
    """
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"container needs a non-empty 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise EmbStoreError("refusing to write non-finite entries")
    header = _MATRIX_HEADER.pack(MAGIC_MATRIX, FORMAT_VERSION, arr.shape[0], arr.shape[1])
    Path(path).write_bytes(header + arr.tobytes())


def read_array(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _MATRIX_HEADER.size:
        raise TruncationError(f"{path}: file shorter than the {_MATRIX_HEADER.size}-byte header")
    magic, version, rows, dim = _MATRIX_HEADER.unpack_from(blob)
    if magic != MAGIC_MATRIX:
        raise MagicError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported version {version}")
    expected = _MATRIX_HEADER.size + rows * dim * 4
    if len(blob) < expected:
        raise TruncationError(f"{path}: payload truncated ({len(blob)} of {expected} bytes)")
    if len(blob) > expected:
        raise EmbStoreError(f"{path}: {len(blob) - expected} trailing bytes after payload")
    arr = np.frombuffer(blob, dtype="<f4", offset=_MATRIX_HEADER.size).reshape(rows, dim)
    if not np.all(np.isfinite(arr)):
        raise EmbStoreError(f"{path}: non-finite entries in payload")
    return arr


def write_labels(path: str | Path, labels: np.ndarray) -> None:
    arr = np.ascontiguousarray(labels, dtype="<u4")
    if arr.ndim != 1:
        raise DimensionError("labels must be 1-d")
    header = _LABELS_HEADER.pack(MAGIC_LABELS, arr.shape[0])
    Path(path).write_bytes(header + arr.tobytes())


def read_labels(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _LABELS_HEADER.size:
        raise TruncationError(f"{path}: file shorter than the {_LABELS_HEADER.size}-byte header")
    magic, count = _LABELS_HEADER.unpack_from(blob)
    if magic != MAGIC_LABELS:
        raise MagicError(f"{path}: bad magic {magic!r}")
    expected = _LABELS_HEADER.size + count * 4
    if len(blob) < expected:
        raise TruncationError(f"{path}: payload truncated ({len(blob)} of {expected} bytes)")
    if len(blob) > expected:
        raise EmbStoreError(f"{path}: {len(blob) - expected} trailing bytes after payload")
    return np.frombuffer(blob, dtype="<u4", offset=_LABELS_HEADER.size).astype(np.uint32)


def save_domain_dataset(directory: str | Path, dataset: DomainDataset) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix(directory / "images.lemb", dataset.embeddings)
    write_labels(directory / "labels.llab", dataset.labels)
    meta = {"domain_name": dataset.domain_name, "class_names": list(dataset.class_names)}
    (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_domain_dataset(directory: str | Path) -> DomainDataset:
    """Load ``images.lemb`` + ``labels.llab`` + ``meta.json`` from a directory."""
    directory = Path(directory)
    for required in ("images.lemb", "labels.llab", "meta.json"):
        if not (directory / required).exists():
            raise FileNotFoundError(directory / required)
    embeddings = read_matrix(directory / "images.lemb")
    labels = read_labels(directory / "labels.llab")
    meta = json.loads((directory / "meta.json").read_text())
    return DomainDataset(
        domain_name=meta["domain_name"],
        embeddings=embeddings,
        labels=labels,
        class_names=tuple(meta["class_names"]),
    )


def save_prompt_bank(directory: str | Path, bank: PromptBank) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix(directory / "class.lemb", bank.class_text)
    for name, mat in bank.composed_text.items():
        write_matrix(directory / f"{name}.lemb", mat)
    write_matrix(directory / f"{bank.target_name}.lemb", bank.target_composed_text)


def load_prompt_bank(
    directory: str | Path, source_names: list[str], target_name: str
) -> PromptBank:
    """Load class prompts plus one composed matrix per source and target."""
    directory = Path(directory)
    if not (directory / "class.lemb").exists():
        raise FileNotFoundError(directory / "class.lemb")
    class_text = read_matrix(directory / "class.lemb")
    composed = {}
    for name in source_names:
        file = directory / f"{name}.lemb"
        if not file.exists():
            raise FileNotFoundError(file)
        composed[name] = read_matrix(file)
    target_file = directory / f"{target_name}.lemb"
    if not target_file.exists():
        raise FileNotFoundError(target_file)
    return PromptBank(
        class_text=class_text,
        composed_text=composed,
        target_composed_text=read_matrix(target_file),
        target_name=target_name,
    )
