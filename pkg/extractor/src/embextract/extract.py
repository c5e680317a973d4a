"""Walk a <domain>/<class>/<image> tree and write the embedding world."""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import formats
from .encoders import make_encoder

log = logging.getLogger("embextract")

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}

DEFAULT_CLASS_TEMPLATE = "a photo of a {c}"
DEFAULT_COMPOSED_TEMPLATE = "a {d} of a {c}"


@dataclass
class ExtractSpec:
    root: Path
    model: str
    out: Path
    sources: list[str]
    target: str
    class_template: str = DEFAULT_CLASS_TEMPLATE
    composed_template: str = DEFAULT_COMPOSED_TEMPLATE
    skipped: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.root = Path(self.root)
        self.out = Path(self.out)
        if not self.root.is_dir():
            raise FileNotFoundError(f"dataset root {self.root} does not exist")
        if not self.sources:
            raise ValueError("at least one source domain is required")
        if self.target in self.sources:
            raise ValueError("target domain must differ from the sources")


def scan_layout(root: Path, domains: list[str]) -> tuple[list[str], dict[str, dict[str, list[Path]]]]:
    """Collect image paths per domain/class; the class list is their union."""
    tree: dict[str, dict[str, list[Path]]] = {}
    classes: set[str] = set()
    for domain in domains:
        domain_dir = root / domain
        if not domain_dir.is_dir():
            raise FileNotFoundError(f"domain directory {domain_dir} does not exist")
        tree[domain] = {}
        for class_dir in sorted(p for p in domain_dir.iterdir() if p.is_dir()):
            files = sorted(
                p for p in class_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
            )
            tree[domain][class_dir.name] = files
            classes.add(class_dir.name)
    class_names = sorted(classes)
    for domain, by_class in tree.items():
        for name in class_names:
            if not by_class.get(name):
                raise ValueError(f"domain {domain!r} has no images for class {name!r}")
    return class_names, tree


def extract(spec: ExtractSpec) -> Path:
    """Encode every domain and the prompt bank; returns the output directory."""
    encoder = make_encoder(spec.model)
    domains = list(spec.sources)
    target_has_images = (spec.root / spec.target).is_dir()
    if target_has_images:
        domains.append(spec.target)
    class_names, tree = scan_layout(spec.root, domains)

    spec.out.mkdir(parents=True, exist_ok=True)
    for domain in domains:
        embeddings, labels = _encode_domain(encoder, tree[domain], class_names, spec)
        formats.write_dataset(spec.out / domain, domain, embeddings, labels, class_names)

    prompts_dir = spec.out / "prompts"
    prompts_dir.mkdir(exist_ok=True)
    bare = [spec.class_template.format(c=c) for c in class_names]
    formats.write_matrix(
        prompts_dir / "class.lemb", formats.normalize_rows(encoder.encode_texts(bare))
    )
    for domain in spec.sources + [spec.target]:
        composed = [spec.composed_template.format(d=domain, c=c) for c in class_names]
        formats.write_matrix(
            prompts_dir / f"{domain}.lemb",
            formats.normalize_rows(encoder.encode_texts(composed)),
        )
    formats.write_world_manifest(
        spec.out,
        sources=spec.sources,
        target=spec.target,
        has_target_dataset=target_has_images,
        num_classes=len(class_names),
        dim=encoder.dim,
    )
    return spec.out


def _encode_domain(encoder, by_class, class_names, spec: ExtractSpec):
    paths: list[Path] = []
    labels: list[int] = []
    skipped = 0
    for label, name in enumerate(class_names):
        kept = 0
        for path in by_class[name]:
            if _readable(path):
                paths.append(path)
                labels.append(label)
                kept += 1
            else:
                skipped += 1
                log.warning("skipping unreadable image %s", path)
        if kept == 0:
            raise ValueError(f"class {name!r} has no readable images")
    if skipped:
        spec.skipped[str(paths[0].parent.parent.name)] = skipped
        print(f"skipped {skipped} unreadable images", file=sys.stderr)
    embeddings = formats.normalize_rows(encoder.encode_images(paths))
    return embeddings, np.asarray(labels, dtype=np.uint32)


def _readable(path: Path) -> bool:
    from PIL import Image

    try:
        with Image.open(path) as img:
            img.verify()
        return True
    except Exception:
        return False
