import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embadapt import embstore
from embadapt.embstore import (
    CountMismatchError,
    DimensionError,
    DomainDataset,
    EmbeddingMatrix,
    LabelRangeError,
    MagicError,
    NormError,
    PromptBank,
    TruncationError,
    VersionError,
)

from conftest import normalized_rows


def unit_matrix(seed: int, rows: int, dim: int) -> EmbeddingMatrix:
    rng = np.random.default_rng(seed)
    return EmbeddingMatrix(normalized_rows(rng, rows, dim))


def test_roundtrip_single_row(tmp_path):
    mat = EmbeddingMatrix(np.array([[0.6, 0.8]], dtype=np.float32))
    path = tmp_path / "m.lemb"
    embstore.write_matrix(path, mat)
    blob = path.read_bytes()
    # magic + version + rows + dim header, then 2 f32 payload values
    assert blob[:4] == b"LEMB"
    assert len(blob) == 24 + 8
    assert struct.unpack_from("<I", blob, 4)[0] == 1
    back = embstore.read_matrix(path)
    assert back.data.tobytes() == mat.data.tobytes()


def test_zero_rows_rejected():
    with pytest.raises(DimensionError):
        EmbeddingMatrix(np.zeros((0, 2), dtype=np.float32))


def test_dim_one_rejected():
    with pytest.raises(DimensionError):
        EmbeddingMatrix(np.ones((3, 1), dtype=np.float32))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_roundtrip_random_matrices(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    rows = int(rng.integers(1, 9))
    dim = int(rng.integers(2, 17))
    mat = EmbeddingMatrix(normalized_rows(rng, rows, dim))
    path = tmp_path_factory.mktemp("rt") / "m.lemb"
    embstore.write_matrix(path, mat)
    back = embstore.read_matrix(path)
    assert back.rows == rows and back.dim == dim
    assert back.data.tobytes() == mat.data.tobytes()
    # write(read(file)) reproduces the file bytes too
    path2 = path.with_suffix(".copy")
    embstore.write_matrix(path2, back)
    assert path2.read_bytes() == path.read_bytes()


def test_bad_magic(tmp_path):
    path = tmp_path / "m.lemb"
    embstore.write_matrix(path, unit_matrix(0, 2, 4))
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XEMB"
    path.write_bytes(bytes(blob))
    with pytest.raises(MagicError):
        embstore.read_matrix(path)


def test_bad_version(tmp_path):
    path = tmp_path / "m.lemb"
    embstore.write_matrix(path, unit_matrix(0, 2, 4))
    blob = bytearray(path.read_bytes())
    struct.pack_into("<I", blob, 4, 7)
    path.write_bytes(bytes(blob))
    with pytest.raises(VersionError):
        embstore.read_matrix(path)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=20, deadline=None)
def test_truncation_any_offset(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    mat = EmbeddingMatrix(normalized_rows(rng, 5, 8))
    path = tmp_path_factory.mktemp("tr") / "m.lemb"
    embstore.write_matrix(path, mat)
    blob = path.read_bytes()
    cut = int(rng.integers(0, len(blob)))
    path.write_bytes(blob[:cut])
    with pytest.raises(TruncationError):
        embstore.read_matrix(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "m.lemb"
    embstore.write_matrix(path, unit_matrix(0, 2, 4))
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(embstore.EmbStoreError):
        embstore.read_matrix(path)


def test_norm_violation_rejected_not_fixed(tmp_path):
    # write a raw container with a row whose norm is off by more than 1e-4
    bad = np.array([[0.6, 0.8], [0.7, 0.8]], dtype=np.float32)
    path = tmp_path / "m.lemb"
    embstore.write_array(path, bad)
    with pytest.raises(NormError):
        embstore.read_matrix(path)
    # the raw container read still works (checkpoints use it)
    raw = embstore.read_array(path)
    assert np.array_equal(raw, bad)


def test_norm_tolerance_boundary():
    row = np.array([1.0 + 2e-4, 0.0, 0.0], dtype=np.float32)
    with pytest.raises(NormError):
        EmbeddingMatrix(row[None, :])
    fine = np.array([1.0 + 0.5e-4, 0.0, 0.0], dtype=np.float32)
    EmbeddingMatrix(fine[None, :])  # within tolerance


def test_nonfinite_rejected(tmp_path):
    with pytest.raises(embstore.EmbStoreError):
        EmbeddingMatrix(np.array([[np.nan, 1.0]], dtype=np.float32))
    with pytest.raises(embstore.EmbStoreError):
        embstore.write_array(tmp_path / "x.lemb", np.array([[np.inf, 0.0]]))


def test_labels_roundtrip(tmp_path):
    labels = np.array([0, 3, 2, 1], dtype=np.uint32)
    path = tmp_path / "l.llab"
    embstore.write_labels(path, labels)
    blob = path.read_bytes()
    assert blob[:4] == b"LLAB"
    assert len(blob) == 12 + 16
    assert np.array_equal(embstore.read_labels(path), labels)


def test_labels_truncation(tmp_path):
    path = tmp_path / "l.llab"
    embstore.write_labels(path, np.arange(6, dtype=np.uint32))
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(TruncationError):
        embstore.read_labels(path)


def write_dataset_dir(tmp_path, rows=6, dim=4, num_classes=3):
    rng = np.random.default_rng(7)
    ds = DomainDataset(
        domain_name="photo",
        embeddings=EmbeddingMatrix(normalized_rows(rng, rows, dim)),
        labels=(np.arange(rows) % num_classes).astype(np.uint32),
        class_names=tuple(f"c{i}" for i in range(num_classes)),
    )
    embstore.save_domain_dataset(tmp_path, ds)
    return ds


def test_load_domain_dataset_valid(tmp_path):
    ds = write_dataset_dir(tmp_path)
    back = embstore.load_domain_dataset(tmp_path)
    assert back.domain_name == ds.domain_name
    assert back.class_names == ds.class_names
    assert np.array_equal(back.labels, ds.labels)
    assert back.embeddings.data.tobytes() == ds.embeddings.data.tobytes()


def test_load_domain_dataset_count_mismatch(tmp_path):
    write_dataset_dir(tmp_path)
    labels = embstore.read_labels(tmp_path / "labels.llab")
    embstore.write_labels(tmp_path / "labels.llab", np.append(labels, 0).astype(np.uint32))
    with pytest.raises(CountMismatchError):
        embstore.load_domain_dataset(tmp_path)


def test_load_domain_dataset_label_out_of_range(tmp_path):
    write_dataset_dir(tmp_path, num_classes=3)
    labels = embstore.read_labels(tmp_path / "labels.llab").copy()
    labels[0] = 3  # == num_classes
    embstore.write_labels(tmp_path / "labels.llab", labels)
    with pytest.raises(LabelRangeError):
        embstore.load_domain_dataset(tmp_path)


def test_load_domain_dataset_missing_file(tmp_path):
    write_dataset_dir(tmp_path)
    (tmp_path / "meta.json").unlink()
    with pytest.raises(FileNotFoundError):
        embstore.load_domain_dataset(tmp_path)


def make_bank(num_classes=5, dim=32, sources=("a", "b", "c"), target="t", seed=3):
    rng = np.random.default_rng(seed)
    return PromptBank(
        class_text=EmbeddingMatrix(normalized_rows(rng, num_classes, dim)),
        composed_text={
            s: EmbeddingMatrix(normalized_rows(rng, num_classes, dim)) for s in sources
        },
        target_composed_text=EmbeddingMatrix(normalized_rows(rng, num_classes, dim)),
        target_name=target,
    )


def test_prompt_bank_roundtrip(tmp_path):
    bank = make_bank()
    embstore.save_prompt_bank(tmp_path, bank)
    back = embstore.load_prompt_bank(tmp_path, ["a", "b", "c"], "t")
    assert back.source_names == ("a", "b", "c")
    assert back.num_classes == 5 and back.dim == 32
    assert back.class_text.data.tobytes() == bank.class_text.data.tobytes()


def test_prompt_bank_missing_target(tmp_path):
    bank = make_bank()
    embstore.save_prompt_bank(tmp_path, bank)
    (tmp_path / "t.lemb").unlink()
    with pytest.raises(FileNotFoundError):
        embstore.load_prompt_bank(tmp_path, ["a", "b", "c"], "t")


def test_prompt_bank_class_count_corruption(tmp_path):
    bank = make_bank()
    embstore.save_prompt_bank(tmp_path, bank)
    rng = np.random.default_rng(0)
    embstore.write_matrix(tmp_path / "b.lemb", EmbeddingMatrix(normalized_rows(rng, 4, 32)))
    with pytest.raises(CountMismatchError):
        embstore.load_prompt_bank(tmp_path, ["a", "b", "c"], "t")


def test_prompt_bank_dim_mismatch(tmp_path):
    bank = make_bank()
    embstore.save_prompt_bank(tmp_path, bank)
    rng = np.random.default_rng(0)
    embstore.write_matrix(tmp_path / "b.lemb", EmbeddingMatrix(normalized_rows(rng, 5, 16)))
    with pytest.raises(DimensionError):
        embstore.load_prompt_bank(tmp_path, ["a", "b", "c"], "t")


def test_meta_sidecar_is_plain_json(tmp_path):
    write_dataset_dir(tmp_path)
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert set(meta) == {"domain_name", "class_names"}
