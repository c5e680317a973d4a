import json
import struct

import numpy as np
import pytest
from PIL import Image

from embextract import ExtractSpec, extract
from embextract.cli import main as cli_main
from embextract.encoders import PALETTE, ToyEncoder, make_encoder

# class labels follow the extractor's sorted class list
CLASSES = ["blue", "green", "red"]
DOMAINS = {"bright": 1.35, "dark": 0.62}


def paint_tree(root, images_per_class=10, classes=CLASSES, domains=DOMAINS):
    """Toy dataset: class = base color, domain = brightness tint."""
    rng = np.random.default_rng(42)
    for domain, tint in domains.items():
        for name in classes:
            directory = root / domain / name
            directory.mkdir(parents=True)
            base = np.array(PALETTE[name], dtype=np.float64)
            for i in range(images_per_class):
                pixels = base * tint + rng.normal(0.0, 12.0, size=(24, 24, 3))
                img = Image.fromarray(np.clip(pixels, 0, 255).astype(np.uint8))
                img.save(directory / f"img{i}.png")


@pytest.fixture
def toy_root(tmp_path):
    root = tmp_path / "data"
    paint_tree(root)
    return root


def run_extract(root, out, target="monochrome"):
    return extract(
        ExtractSpec(
            root=root,
            model="toy:48",
            out=out,
            sources=list(DOMAINS),
            target=target,
        )
    )


def read_matrix(path):
    blob = path.read_bytes()
    magic, version, rows, dim = struct.unpack_from("<4sIQQ", blob)
    assert magic == b"LEMB" and version == 1
    return np.frombuffer(blob, dtype="<f4", offset=28 - 4).reshape(rows, dim)


class TestStructure:
    def test_layout_written(self, toy_root, tmp_path):
        out = run_extract(toy_root, tmp_path / "world")
        for domain in DOMAINS:
            assert (out / domain / "images.lemb").exists()
            assert (out / domain / "labels.llab").exists()
            meta = json.loads((out / domain / "meta.json").read_text())
            assert meta["domain_name"] == domain
            assert meta["class_names"] == CLASSES
        assert (out / "prompts" / "class.lemb").exists()
        for name in list(DOMAINS) + ["monochrome"]:
            assert (out / "prompts" / f"{name}.lemb").exists()
        world = json.loads((out / "world.json").read_text())
        assert world["sources"] == sorted(DOMAINS)
        assert world["target"] == "monochrome"
        assert world["has_target_dataset"] is False

    def test_rerun_byte_identical(self, toy_root, tmp_path):
        out1 = run_extract(toy_root, tmp_path / "w1")
        out2 = run_extract(toy_root, tmp_path / "w2")
        for rel in ("bright/images.lemb", "dark/labels.llab", "prompts/class.lemb"):
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes()

    def test_rows_unit_norm(self, toy_root, tmp_path):
        out = run_extract(toy_root, tmp_path / "world")
        mat = read_matrix(out / "bright" / "images.lemb").astype(np.float64)
        assert np.abs(np.linalg.norm(mat, axis=1) - 1.0).max() < 1e-4


class TestErrors:
    def test_empty_class_rejected(self, toy_root, tmp_path):
        extra = toy_root / "bright" / "yellow"
        extra.mkdir()
        with pytest.raises(ValueError, match="yellow"):
            run_extract(toy_root, tmp_path / "world")

    def test_unreadable_image_skipped_with_count(self, toy_root, tmp_path, capsys):
        (toy_root / "bright" / "red" / "broken.png").write_bytes(b"not an image")
        out = run_extract(toy_root, tmp_path / "world")
        assert "skipped 1 unreadable" in capsys.readouterr().err
        mat = read_matrix(out / "bright" / "images.lemb")
        assert mat.shape[0] == len(CLASSES) * 10  # broken file not counted

    def test_missing_domain(self, toy_root, tmp_path):
        with pytest.raises(FileNotFoundError):
            extract(
                ExtractSpec(
                    root=toy_root,
                    model="toy:48",
                    out=tmp_path / "w",
                    sources=["bright", "sepia"],
                    target="monochrome",
                )
            )

    def test_unknown_model(self, toy_root, tmp_path):
        with pytest.raises(ValueError):
            make_encoder("segformer:whatever")


class TestZeroShotSanity:
    def test_images_prefer_own_class_text(self, toy_root, tmp_path):
        # majority vote per class: own-class prompt similarity must win
        out = run_extract(toy_root, tmp_path / "world")
        encoder = ToyEncoder(48)
        texts = encoder.encode_texts([f"a photo of a {c}" for c in CLASSES])
        for domain in DOMAINS:
            images = read_matrix(out / domain / "images.lemb").astype(np.float64)
            labels = np.frombuffer(
                (out / domain / "labels.llab").read_bytes()[12:], dtype="<u4"
            )
            for cls in range(len(CLASSES)):
                rows = images[labels == cls][:10]
                sims = rows @ texts.T
                wins = (sims.argmax(axis=1) == cls).sum()
                assert wins > len(rows) / 2


class TestCli:
    def test_cli_roundtrip(self, toy_root, tmp_path, capsys):
        code = cli_main(
            [
                "extract",
                "--root", str(toy_root),
                "--model", "toy:48",
                "--out", str(tmp_path / "world"),
                "--sources", "bright,dark",
                "--target", "monochrome",
            ]
        )
        assert code == 0
        assert "world written" in capsys.readouterr().out

    def test_cli_reports_errors(self, tmp_path, capsys):
        code = cli_main(
            [
                "extract",
                "--root", str(tmp_path / "missing"),
                "--model", "toy:48",
                "--out", str(tmp_path / "world"),
                "--sources", "a",
                "--target", "t",
            ]
        )
        assert code == 1
        assert "error" in capsys.readouterr().err


class TestPrimaryIntegration:
    """The extracted world must satisfy the training library end to end."""

    def test_primary_validates_and_trains(self, toy_root, tmp_path):
        embadapt = pytest.importorskip("embadapt")
        from embadapt import pipeline, synth
        from embadapt.losses import LossConfig

        out = run_extract(toy_root, tmp_path / "world")
        sources, target, bank = synth.load_world(out)
        assert target is None
        assert [d.domain_name for d in sources] == ["bright", "dark"]
        cfg = pipeline.TrainConfig(
            epochs_stage1=3,
            epochs_stage2=5,
            lr_stage2=1e-2,
            milestones_stage2=(3,),
            gamma_stage2=0.5,
            batch_size=15,
            hidden=32,
            seed=0,
            loss=LossConfig(tau=2.0, ot_max_iter=150),
        )
        model, history = pipeline.train_full(sources, bank, cfg)
        for ds in sources:
            res = pipeline.evaluate(ds, model, use_aggregation=False)
            assert res.accuracy > 0.5  # colors are trivially separable
        weights = model.weights
        assert abs(sum(weights.values()) - 1.0) < 1e-9
