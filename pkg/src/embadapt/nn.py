"""Minimal neural kernels written directly in numpy.

One 2-layer rectifier MLP per source domain (the "augmenter"), a shared
linear classifier, Adam, and a multi-step learning-rate schedule. No
autodiff: the backward passes are exact reverse-mode derivatives,
validated against finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import embstore

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class Augmenter:
    """Parameters of one domain-specific 2-layer MLP, m -> h -> m."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        h, m = self.W1.shape
        if self.b1.shape != (h,) or self.W2.shape != (m, h) or self.b2.shape != (m,):
            raise ValueError(
                f"inconsistent augmenter shapes: W1 {self.W1.shape}, b1 {self.b1.shape}, "
                f"W2 {self.W2.shape}, b2 {self.b2.shape}"
            )
        for name, p in self.named_params():
            if not np.all(np.isfinite(p)):
                raise ValueError(f"non-finite values in augmenter parameter {name}")

    @property
    def dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        return [("W1", self.W1), ("b1", self.b1), ("W2", self.W2), ("b2", self.b2)]

    def with_params(self, params: list[np.ndarray]) -> "Augmenter":
        return Augmenter(*params)


@dataclass
class LinearClassifier:
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError(f"inconsistent classifier shapes: W {self.W.shape}, b {self.b.shape}")
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))):
            raise ValueError("non-finite classifier parameters")

    @property
    def num_classes(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def params(self) -> list[np.ndarray]:
        return [self.W, self.b]

    def with_params(self, params: list[np.ndarray]) -> "LinearClassifier":
        return LinearClassifier(*params)


@dataclass
class ForwardCache:
    """Intermediates kept by augmenter_forward for the backward pass."""

    x: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    pre_norm: np.ndarray
    norms: np.ndarray | None
    out: np.ndarray


def augmenter_forward(
    aug: Augmenter, x: np.ndarray, normalize: bool = True
) -> tuple[np.ndarray, ForwardCache]:
    """Apply ``W2 relu(W1 x + b1) + b2`` row-wise, optionally unit-normalized.

    The rest of the system trades exclusively in unit-norm embeddings, so
    normalize=True is the production path; raw output is exposed for tests.
    """
    if x.ndim != 2 or x.shape[1] != aug.dim:
        raise ValueError(f"input shape {x.shape} does not match augmenter dim {aug.dim}")
    z1 = x @ aug.W1.T + aug.b1
    a1 = np.maximum(z1, 0.0)
    pre = a1 @ aug.W2.T + aug.b2
    if normalize:
        norms = np.linalg.norm(pre, axis=1)
        if np.any(norms < 1e-12):
            row = int(np.argmin(norms))
            raise ZeroNormError(f"augmenter output row {row} has zero norm, cannot normalize")
        out = pre / norms[:, None]
    else:
        norms = None
        out = pre
    return out, ForwardCache(x=x, z1=z1, a1=a1, pre_norm=pre, norms=norms, out=out)


class ZeroNormError(ValueError):
    pass


@dataclass
class AugmenterGrads:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def as_list(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]


def augmenter_backward(
    aug: Augmenter, cache: ForwardCache, d_out: np.ndarray
) -> tuple[AugmenterGrads, np.ndarray]:
    """Exact reverse-mode gradients for augmenter_forward.

    Includes the Jacobian of the row normalization when the forward pass
    used it: d/dy (y/|y|) applied to the incoming cotangent.
    """
    if d_out.shape != cache.pre_norm.shape:
        raise ValueError(f"cotangent shape {d_out.shape} does not match cache")
    if cache.norms is not None:
        # out = y / |y|  =>  d_y = (d_out - (d_out . out) out) / |y|
        inner = np.einsum("ij,ij->i", d_out, cache.out)
        d_pre = (d_out - inner[:, None] * cache.out) / cache.norms[:, None]
    else:
        d_pre = d_out
    d_b2 = d_pre.sum(axis=0)
    d_w2 = d_pre.T @ cache.a1
    d_a1 = d_pre @ aug.W2
    d_z1 = d_a1 * (cache.z1 > 0.0)
    d_b1 = d_z1.sum(axis=0)
    d_w1 = d_z1.T @ cache.x
    d_x = d_z1 @ aug.W1
    return AugmenterGrads(W1=d_w1, b1=d_b1, W2=d_w2, b2=d_b2), d_x


def linear_forward(clf: LinearClassifier, x: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != clf.dim:
        raise ValueError(f"input shape {x.shape} does not match classifier dim {clf.dim}")
    return x @ clf.W.T + clf.b


@dataclass
class AdamState:
    """First/second moment buffers, one pair per parameter array."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def init(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray], lr: float
) -> list[np.ndarray]:
    """One bias-corrected Adam update; mutates the state, returns new params."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameter/gradient/state length mismatch")
    for i, g in enumerate(grads):
        if g.shape != params[i].shape:
            raise ValueError(f"gradient {i} shape {g.shape} != parameter shape {params[i].shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for parameter {i}")
    state.step += 1
    t = state.step
    out = []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        m_hat = m / (1.0 - ADAM_BETA1**t)
        v_hat = v / (1.0 - ADAM_BETA2**t)
        out.append(p - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS))
    return out


def lr_at_epoch(base_lr: float, milestones: list[int], gamma: float, epoch: int) -> float:
    """Multi-step schedule: base_lr decayed once per milestone <= epoch."""
    if any(m2 <= m1 for m1, m2 in zip(milestones, milestones[1:])):
        raise ValueError(f"milestones must be strictly increasing, got {milestones}")
    hits = sum(1 for ms in milestones if ms <= epoch)
    return base_lr * gamma**hits


def init_params(
    seed: int, m: int, h: int, num_classes: int, num_domains: int
) -> tuple[list[Augmenter], LinearClassifier]:
    """Deterministic fan-in uniform init: weights ~ U(-1/sqrt(fan_in), +), biases 0."""
    if m < 1 or h < 1 or num_classes < 1 or num_domains < 1:
        raise ValueError("all sizes must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1A17]))
    augs = []
    for _ in range(num_domains):
        s1 = 1.0 / np.sqrt(m)
        s2 = 1.0 / np.sqrt(h)
        augs.append(
            Augmenter(
                W1=rng.uniform(-s1, s1, size=(h, m)),
                b1=np.zeros(h),
                W2=rng.uniform(-s2, s2, size=(m, h)),
                b2=np.zeros(m),
            )
        )
    sc = 1.0 / np.sqrt(m)
    clf = LinearClassifier(W=rng.uniform(-sc, sc, size=(num_classes, m)), b=np.zeros(num_classes))
    return augs, clf


def save_augmenter(directory: str | Path, name: str, aug: Augmenter) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for pname, p in aug.named_params():
        arr = p if p.ndim == 2 else p[None, :]
        embstore.write_array(directory / f"aug_{name}_{pname}.lemb", arr)


def load_augmenter(directory: str | Path, name: str) -> Augmenter:
    directory = Path(directory)
    parts = {}
    for pname in ("W1", "b1", "W2", "b2"):
        arr = embstore.read_array(directory / f"aug_{name}_{pname}.lemb").astype(np.float64)
        parts[pname] = arr if pname.startswith("W") else arr[0]
    return Augmenter(**parts)


def save_classifier(directory: str | Path, clf: LinearClassifier) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    embstore.write_array(directory / "clf_W.lemb", clf.W)
    embstore.write_array(directory / "clf_b.lemb", clf.b[None, :])


def load_classifier(directory: str | Path) -> LinearClassifier:
    directory = Path(directory)
    w = embstore.read_array(directory / "clf_W.lemb").astype(np.float64)
    b = embstore.read_array(directory / "clf_b.lemb").astype(np.float64)[0]
    return LinearClassifier(W=w, b=b)


def save_manifest(directory: str | Path, manifest: dict) -> None:
    (Path(directory) / "model.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_manifest(directory: str | Path) -> dict:
    return json.loads((Path(directory) / "model.json").read_text())
