"""Synthetic multi-domain embedding worlds.

Construction: orthonormal class prototypes c_y and domain directions d_k
(plus one extra direction for the unseen target). Each domain carries the
prototypes rotated within the class subspace (the class-relevant part of
its shift) plus a translation along its own direction; an image embedding
is normalize(sep * c_y^k + shift * d_k + noise) and the composed
domain/class text is the identical expression without the noise. The
composed-text difference between two domains therefore equals the
zero-noise image difference exactly, which is the property the alignment
loss relies on; it makes every training stage testable end to end.

The rotations all lie on one family exp(t * A): source k sits at t = k
times the angle scale and the target sits between the first two sources,
nearest the first. The rotation is what makes the unseen target genuinely
hard for a pooled source-only probe, and the uneven source-to-target
distances are what the text-distance aggregation weighting can detect.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embstore import (
    DomainDataset,
    EmbeddingMatrix,
    PromptBank,
    load_domain_dataset,
    load_prompt_bank,
    save_domain_dataset,
    save_prompt_bank,
)


@dataclass(frozen=True)
class WorldSpec:
    dim: int = 32
    num_classes: int = 5
    num_sources: int = 3
    samples_per_class: int = 100
    domain_shift: float = 0.9
    class_separation: float = 1.0
    noise_scale: float = 0.2
    class_mix: float = 0.35
    seed: int = 0

    def __post_init__(self):
        if min(self.dim, self.num_classes, self.num_sources, self.samples_per_class) < 1:
            raise ValueError("all counts must be >= 1")
        if self.class_separation <= 0.0:
            raise ValueError("class separation must be positive")
        if self.domain_shift < 0.0 or self.noise_scale < 0.0 or self.class_mix < 0.0:
            raise ValueError("shift, noise and mix magnitudes must be nonnegative")
        if self.dim < self.num_classes + self.num_sources + 1:
            raise ValueError(
                f"dim {self.dim} too small for {self.num_classes} classes + "
                f"{self.num_sources} sources + 1 target (orthonormal prototypes)"
            )


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def generate_world(spec: WorldSpec) -> tuple[list[DomainDataset], DomainDataset, PromptBank]:
    """Build source datasets, a held-out target dataset, and the prompt bank.

    Deterministic given the spec's seed. Matrices are quantized to the
    float32 storage currency so in-memory worlds are bit-identical to the
    same world after a disk round trip.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x57]))
    c, n_src, m = spec.num_classes, spec.num_sources, spec.dim
    basis, _ = np.linalg.qr(rng.normal(size=(m, c + n_src + 1)))
    protos = basis[:, :c].T
    domain_dirs = basis[:, c : c + n_src].T
    target_dir = basis[:, c + n_src]

    # Part of each domain's shift rotates the class prototypes within the
    # class subspace (class-relevant shift); the rest is the usual
    # translation along the domain direction. All domains sit on one
    # rotation family at different positions, which gives them a notion
    # of relatedness: the target sits between the first two sources,
    # nearest the first. The angle scale is tied to the shift so a
    # zero-shift world has identical domains.
    angle = spec.class_mix * spec.domain_shift
    generator = _skew_generator(c, rng)
    domain_protos = [_rotated(protos, generator, k * angle) for k in range(n_src)]
    target_protos = _rotated(protos, generator, TARGET_ROTATION_POSITION * angle)

    class_names = tuple(f"class{i}" for i in range(c))
    class_text = EmbeddingMatrix(_normalize_rows(protos))

    def composed(own_protos: np.ndarray, direction: np.ndarray) -> EmbeddingMatrix:
        return EmbeddingMatrix(
            _normalize_rows(spec.class_separation * own_protos + spec.domain_shift * direction)
        )

    source_names = [f"source{k}" for k in range(n_src)]
    bank = PromptBank(
        class_text=class_text,
        composed_text={
            name: composed(domain_protos[k], domain_dirs[k])
            for k, name in enumerate(source_names)
        },
        target_composed_text=composed(target_protos, target_dir),
        target_name="target",
    )

    def dataset(name: str, own_protos: np.ndarray, direction: np.ndarray) -> DomainDataset:
        labels = np.repeat(np.arange(c, dtype=np.uint32), spec.samples_per_class)
        base = spec.class_separation * own_protos[labels] + spec.domain_shift * direction
        noise = spec.noise_scale * rng.normal(size=base.shape)
        return DomainDataset(
            domain_name=name,
            embeddings=EmbeddingMatrix(_normalize_rows(base + noise)),
            labels=labels,
            class_names=class_names,
        )

    sources = [
        dataset(name, domain_protos[k], domain_dirs[k]) for k, name in enumerate(source_names)
    ]
    target = dataset("target", target_protos, target_dir)
    return sources, target, bank


TARGET_ROTATION_POSITION = 0.35


def _skew_generator(c: int, rng: np.random.Generator) -> np.ndarray:
    """Random skew-symmetric generator normalized to unit rotation speed."""
    g = rng.normal(size=(c, c))
    skew = (g - g.T) / np.sqrt(2.0)
    norm = np.linalg.norm(skew)
    if norm == 0.0:
        return skew
    return skew * (np.sqrt(c) / norm)


def _rotated(protos: np.ndarray, generator: np.ndarray, t: float) -> np.ndarray:
    """Prototype rows rotated within their span: expm(t * generator) @ protos.

    The rotation mixes class directions into each other, so it is the part
    of a domain shift a label-blind classifier cannot simply ignore.
    """
    if t == 0.0:
        return protos.copy()
    return _expm(t * generator) @ protos


def _expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a Taylor core."""
    norm = np.linalg.norm(a)
    squarings = max(0, int(np.ceil(np.log2(max(norm, 1e-16) / 0.25))))
    small = a / (2.0**squarings)
    term = np.eye(a.shape[0])
    total = term.copy()
    for k in range(1, 16):
        term = term @ small / k
        total += term
    for _ in range(squarings):
        total = total @ total
    return total


def zero_shot_eval(
    dataset: DomainDataset, bank: PromptBank, tau: float = 100.0, composed: bool = False
) -> float:
    """Accuracy of nearest-class-text classification.

    With ``composed=True`` the sample's own domain/class composition is
    used instead of the bare class name (the "augmented prompt" variant).
    """
    if composed:
        if dataset.domain_name == bank.target_name:
            text = bank.target_composed_text
        else:
            text = bank.composed_text[dataset.domain_name]
    else:
        text = bank.class_text
    scores = tau * (dataset.embeddings.f64() @ text.f64().T)
    return float((scores.argmax(axis=1) == dataset.labels).mean())


def write_world(
    directory: str | Path,
    sources: list[DomainDataset],
    target: DomainDataset | None,
    bank: PromptBank,
) -> None:
    """Lay a world out on disk in the standard dataset/prompt directory shape."""
    import json

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for ds in sources:
        save_domain_dataset(directory / ds.domain_name, ds)
    if target is not None:
        save_domain_dataset(directory / target.domain_name, target)
    save_prompt_bank(directory / "prompts", bank)
    info = {
        "sources": sorted(ds.domain_name for ds in sources),
        "target": bank.target_name,
        "has_target_dataset": target is not None,
        "num_classes": bank.num_classes,
        "dim": bank.dim,
    }
    (directory / "world.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")


def load_world(
    directory: str | Path,
) -> tuple[list[DomainDataset], DomainDataset | None, PromptBank]:
    import json

    directory = Path(directory)
    info = json.loads((directory / "world.json").read_text())
    sources = [load_domain_dataset(directory / name) for name in info["sources"]]
    target = None
    if info.get("has_target_dataset"):
        target = load_domain_dataset(directory / info["target"])
    bank = load_prompt_bank(directory / "prompts", info["sources"], info["target"])
    return sources, target, bank
