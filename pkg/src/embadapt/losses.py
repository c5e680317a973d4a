"""Training losses with hand-derived gradients.

Stage one trains each augmenter with three terms: a direction-alignment
loss steering the change of each embedding along its class's
target-minus-source prompt direction, a cross-entropy term against the
bare class texts that preserves class structure, and an entropic
transport term pulling the augmented clouds of different sources onto a
common distribution. Stage two is a mixed cross-entropy for the linear
head. All reductions are sums over samples, not means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn, ot
from .embstore import PromptBank
from .ot import Batch


@dataclass(frozen=True)
class LossConfig:
    """Loss weights and transport parameters, with the stock defaults."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.05
    lam: float = 1.0
    sigma: float = 1.0
    zeta: float = 10.0
    tau: float = 100.0
    eps_mix: float = 0.1
    ot_max_iter: int = 1000
    ot_tol: float = 1e-6

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "lam"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        for name in ("sigma", "zeta", "tau"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ValueError(f"{name} must be finite and positive, got {v}")
        if not 0.0 <= self.eps_mix <= 1.0:
            raise ValueError(f"eps_mix must be in [0, 1], got {self.eps_mix}")


class DegenerateRowError(ValueError):
    """A zero-length difference vector makes the cosine loss undefined."""


def domain_alignment(
    aug_out: np.ndarray, x: np.ndarray, text_dir: np.ndarray
) -> tuple[float, np.ndarray]:
    """Sum of 1 - cos(aug_out_i - x_i, text_dir_i) and its aug_out gradient.

    Only directions matter: the loss is invariant to positive rescaling of
    text_dir rows.
    """
    if aug_out.shape != x.shape or text_dir.shape != x.shape:
        raise ValueError("aug_out, x and text_dir must have identical shapes")
    u = aug_out - x
    u_norm = np.linalg.norm(u, axis=1)
    t_norm = np.linalg.norm(text_dir, axis=1)
    if np.any(u_norm < 1e-12):
        raise DegenerateRowError(
            f"row {int(np.argmin(u_norm))}: augmented output equals its input"
        )
    if np.any(t_norm < 1e-12):
        raise DegenerateRowError(f"row {int(np.argmin(t_norm))}: zero text direction")
    t_hat = text_dir / t_norm[:, None]
    u_hat = u / u_norm[:, None]
    cos = np.einsum("ij,ij->i", u_hat, t_hat)
    loss = float((1.0 - cos).sum())
    grad = -(t_hat - cos[:, None] * u_hat) / u_norm[:, None]
    return loss, grad


def _softmax_ce(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Summed cross-entropy with log-sum-exp stabilization; dL/dlogits."""
    labels = np.asarray(labels, dtype=np.intp)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= logits.shape[1]:
        raise ValueError("label out of range")
    peak = logits.max(axis=1, keepdims=True)
    shifted = logits - peak
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True)) + peak
    rows = np.arange(logits.shape[0])
    loss = float((lse[:, 0] - logits[rows, labels]).sum())
    d_logits = np.exp(logits - lse)
    d_logits[rows, labels] -= 1.0
    return loss, d_logits


def class_alignment(
    aug_out: np.ndarray, labels: np.ndarray, class_text: np.ndarray, tau: float
) -> tuple[float, np.ndarray]:
    """Cross-entropy of tau-scaled similarities to the bare class texts."""
    logits = tau * (aug_out @ class_text.T)
    loss, d_logits = _softmax_ce(logits, labels)
    return loss, tau * (d_logits @ class_text)


def distribution_consistency(
    k: str, batches: dict[str, Batch], bank: PromptBank, cfg: LossConfig
) -> tuple[float, np.ndarray]:
    """Summed entropic distance from domain k's batch to every other batch.

    The gradient treats each transport plan as fixed (envelope form) and
    the other domains' outputs as constants, so it flows only through
    domain k's entries of the cost matrices.
    """
    if k not in batches:
        raise KeyError(f"domain {k!r} missing from batches")
    xk = batches[k].x
    grad = np.zeros_like(xk)
    total = 0.0
    for name, other in batches.items():
        if name == k:
            continue
        value, plan, cost = ot.wasserstein_pair(
            batches[k],
            other,
            bank,
            zeta=cfg.zeta,
            lam=cfg.lam,
            sigma=cfg.sigma,
            max_iter=cfg.ot_max_iter,
            tol=cfg.ot_tol,
        )
        total += value
        # dC_ab/dx_a = C_ab (x_a - x_b) / sigma^2, plan held fixed
        m = plan.plan * cost.values
        grad += (m.sum(axis=1)[:, None] * xk - m @ other.x) / (cfg.sigma**2)
    return total, grad


@dataclass
class CombinedResult:
    loss: float
    parts: dict[str, float]
    grads: nn.AugmenterGrads
    aug_out: np.ndarray


def combined(
    aug: nn.Augmenter,
    x: np.ndarray,
    labels: np.ndarray,
    text_dir: np.ndarray,
    bank: PromptBank,
    other_batches: dict[str, Batch],
    k: str,
    cfg: LossConfig,
) -> CombinedResult:
    """Full stage-one objective for one domain's augmenter on one batch.

    alpha * alignment + beta * class CE + gamma * distribution consistency,
    with the gradient chained through the augmenter (normalization
    included). Zero-weighted terms are skipped entirely, which leaves the
    remaining value bit-identical to computing them alone.
    """
    out, cache = nn.augmenter_forward(aug, x, normalize=True)
    parts: dict[str, float] = {}
    d_out = np.zeros_like(out)

    loss_da, grad_da = domain_alignment(out, x, text_dir)
    parts["domain_alignment"] = loss_da
    d_out += cfg.alpha * grad_da
    # the alignment difference also touches x, but x here is data, not a parameter

    if cfg.beta != 0.0:
        loss_ca, grad_ca = class_alignment(out, labels, bank.class_text.f64(), cfg.tau)
        parts["class_alignment"] = loss_ca
        d_out += cfg.beta * grad_ca
    else:
        parts["class_alignment"] = 0.0

    if cfg.gamma != 0.0 and len(other_batches) > 0:
        batches = dict(other_batches)
        batches[k] = Batch(out, labels)
        loss_dc, grad_dc = distribution_consistency(k, batches, bank, cfg)
        parts["distribution_consistency"] = loss_dc
        d_out += cfg.gamma * grad_dc
    else:
        parts["distribution_consistency"] = 0.0

    total = (
        cfg.alpha * parts["domain_alignment"]
        + cfg.beta * parts["class_alignment"]
        + cfg.gamma * parts["distribution_consistency"]
    )
    grads, _ = nn.augmenter_backward(aug, cache, d_out)
    return CombinedResult(loss=total, parts=parts, grads=grads, aug_out=out)


def classifier_loss(
    clf: nn.LinearClassifier,
    x_orig: np.ndarray,
    x_aug: np.ndarray,
    labels: np.ndarray,
    eps_mix: float,
) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """eps * CE on originals + (1 - eps) * CE on augmented embeddings."""
    if x_orig.shape != x_aug.shape:
        raise ValueError("original and augmented batches must be row-aligned")
    loss_o, d_logits_o = _softmax_ce(nn.linear_forward(clf, x_orig), labels)
    loss_a, d_logits_a = _softmax_ce(nn.linear_forward(clf, x_aug), labels)
    loss = eps_mix * loss_o + (1.0 - eps_mix) * loss_a
    d_w = eps_mix * d_logits_o.T @ x_orig + (1.0 - eps_mix) * d_logits_a.T @ x_aug
    d_b = eps_mix * d_logits_o.sum(axis=0) + (1.0 - eps_mix) * d_logits_a.sum(axis=0)
    return loss, (d_w, d_b)
