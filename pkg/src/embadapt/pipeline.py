"""Two-stage training, aggregated prediction, evaluation and diagnostics.

Stage one fits one augmenter per source domain against the combined
objective, round-robin within each minibatch step. Stage two fits the
shared linear head on original plus augmented embeddings with the
augmenters frozen. Prediction on the unseen target aggregates the
augmenters' outputs with weights derived from text-space transport
distances. Everything is deterministic given (seed, config, data);
summation over domains always runs in sorted-name order so results do
not depend on how the caller listed the sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn, ot
from .embstore import DomainDataset, PromptBank
from .losses import LossConfig, class_alignment, classifier_loss, combined
from .ot import Batch


@dataclass(frozen=True)
class TrainConfig:
    epochs_stage1: int = 10
    epochs_stage2: int = 10
    lr_stage1: float = 1e-2
    lr_stage2: float = 1e-3
    milestones_stage1: tuple[int, ...] = (2, 4, 7, 10, 15, 20, 30, 40)
    gamma_stage1: float = 0.5
    milestones_stage2: tuple[int, ...] = (1, 3, 5)
    gamma_stage2: float = 0.1
    batch_size: int = 100
    hidden: int | None = None
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    enable_class_alignment: bool = True
    enable_distribution_consistency: bool = True
    weighting: str = "as-written"

    def __post_init__(self):
        if self.epochs_stage1 < 1 or self.epochs_stage2 < 1:
            raise ValueError("epoch counts must be >= 1")
        if self.enable_distribution_consistency and self.batch_size < 2:
            raise ValueError("batch size must be >= 2 when distribution consistency is on")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.weighting not in ("as-written", "inverse"):
            raise ValueError(f"unknown weighting mode {self.weighting!r}")

    def effective_loss(self) -> LossConfig:
        """Loss config with disabled terms zeroed out."""
        cfg = self.loss
        if not self.enable_class_alignment:
            cfg = replace(cfg, beta=0.0)
        if not self.enable_distribution_consistency:
            cfg = replace(cfg, gamma=0.0)
        return cfg


@dataclass
class AdaptedModel:
    """Trained augmenters, shared classifier, and aggregation weights."""

    augmenters: dict[str, nn.Augmenter]
    classifier: nn.LinearClassifier
    weights: dict[str, float]
    config: TrainConfig
    target_name: str

    def __post_init__(self):
        if set(self.augmenters) != set(self.weights):
            raise ValueError("augmenter and weight domains differ")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"aggregation weights sum to {total}, not 1")
        if any(w < 0.0 for w in self.weights.values()):
            raise ValueError("aggregation weights must be nonnegative")

    @property
    def source_names(self) -> tuple[str, ...]:
        return tuple(sorted(self.augmenters))


def _sorted_datasets(datasets: list[DomainDataset]) -> list[DomainDataset]:
    if not datasets:
        raise ValueError("at least one source domain is required")
    out = sorted(datasets, key=lambda d: d.domain_name)
    if len({d.domain_name for d in out}) != len(out):
        raise ValueError("duplicate domain names")
    first = out[0].class_names
    for ds in out[1:]:
        if ds.class_names != first:
            raise ValueError(f"domain {ds.domain_name} has a different class list")
    return out


def _batch_plan(n_min: int, batch_size: int) -> tuple[int, int]:
    b = min(batch_size, n_min)
    return b, max(1, n_min // b)


def train_augmenters(
    datasets: list[DomainDataset], bank: PromptBank, cfg: TrainConfig
) -> tuple[dict[str, nn.Augmenter], dict[str, list[dict[str, float]]]]:
    """Stage one: fit one augmenter per source domain.

    Per epoch, per minibatch step, domains are updated round-robin: all
    domains' current batches are pushed through their (current) augmenters,
    the combined objective and its gradient are taken for domain k alone,
    and augmenter k gets one Adam step. Returns the augmenters plus
    per-domain, per-epoch loss curves.
    """
    datasets = _sorted_datasets(datasets)
    if set(bank.source_names) != {d.domain_name for d in datasets}:
        raise ValueError("prompt bank domains do not match the datasets")
    loss_cfg = cfg.effective_loss()
    m = bank.dim
    hidden = cfg.hidden or max(1, m // 2)
    num_classes = bank.num_classes
    augs_list, _ = nn.init_params(cfg.seed, m, hidden, num_classes, len(datasets))
    augs = {ds.domain_name: augs_list[i] for i, ds in enumerate(datasets)}
    states = {name: nn.AdamState.init(a.params()) for name, a in augs.items()}

    embeddings = {d.domain_name: d.embeddings.f64() for d in datasets}
    labels = {d.domain_name: d.labels.astype(np.intp) for d in datasets}
    text_dir = {
        d.domain_name: bank.target_composed_text.f64() - bank.composed_text[d.domain_name].f64()
        for d in datasets
    }

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x51]))
    n_min = min(len(d.labels) for d in datasets)
    batch, steps = _batch_plan(n_min, cfg.batch_size)

    history: dict[str, list[dict[str, float]]] = {d.domain_name: [] for d in datasets}
    for epoch in range(cfg.epochs_stage1):
        lr = nn.lr_at_epoch(cfg.lr_stage1, list(cfg.milestones_stage1), cfg.gamma_stage1, epoch)
        perms = {d.domain_name: rng.permutation(len(d.labels)) for d in datasets}
        epoch_sums = {d.domain_name: {} for d in datasets}
        for step in range(steps):
            idx = {
                name: perm[step * batch : (step + 1) * batch] for name, perm in perms.items()
            }
            for ds in datasets:
                k = ds.domain_name
                others = {}
                for other in datasets:
                    j = other.domain_name
                    if j == k:
                        continue
                    out_j, _ = nn.augmenter_forward(
                        augs[j], embeddings[j][idx[j]], normalize=True
                    )
                    others[j] = Batch(out_j, labels[j][idx[j]])
                rows = idx[k]
                result = combined(
                    augs[k],
                    embeddings[k][rows],
                    labels[k][rows],
                    text_dir[k][labels[k][rows]],
                    bank,
                    others,
                    k,
                    loss_cfg,
                )
                if not math.isfinite(result.loss):
                    raise RuntimeError(
                        f"non-finite loss {result.loss} at epoch {epoch}, "
                        f"step {step}, domain {k}"
                    )
                augs[k] = augs[k].with_params(
                    nn.adam_step(states[k], augs[k].params(), result.grads.as_list(), lr)
                )
                sums = epoch_sums[k]
                sums["total"] = sums.get("total", 0.0) + result.loss
                for part, value in result.parts.items():
                    sums[part] = sums.get(part, 0.0) + value
        for name, sums in epoch_sums.items():
            history[name].append(dict(sums))
    return augs, history


def train_classifier(
    datasets: list[DomainDataset], augmenters: dict[str, nn.Augmenter], cfg: TrainConfig
) -> nn.LinearClassifier:
    """Stage two: fit the linear head on originals + frozen augmenter outputs."""
    datasets = _sorted_datasets(datasets)
    m = datasets[0].embeddings.dim
    hidden = cfg.hidden or max(1, m // 2)
    num_classes = datasets[0].num_classes
    _, clf = nn.init_params(cfg.seed, m, hidden, num_classes, len(datasets))
    state = nn.AdamState.init(clf.params())

    originals = {d.domain_name: d.embeddings.f64() for d in datasets}
    augmented = {
        d.domain_name: nn.augmenter_forward(
            augmenters[d.domain_name], originals[d.domain_name], normalize=True
        )[0]
        for d in datasets
    }
    labels = {d.domain_name: d.labels.astype(np.intp) for d in datasets}

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x52]))
    n_min = min(len(d.labels) for d in datasets)
    batch, steps = _batch_plan(n_min, cfg.batch_size)

    for epoch in range(cfg.epochs_stage2):
        lr = nn.lr_at_epoch(cfg.lr_stage2, list(cfg.milestones_stage2), cfg.gamma_stage2, epoch)
        perms = {d.domain_name: rng.permutation(len(d.labels)) for d in datasets}
        for step in range(steps):
            total_dw = np.zeros_like(clf.W)
            total_db = np.zeros_like(clf.b)
            for ds in datasets:
                k = ds.domain_name
                rows = perms[k][step * batch : (step + 1) * batch]
                loss, (dw, db) = classifier_loss(
                    clf,
                    originals[k][rows],
                    augmented[k][rows],
                    labels[k][rows],
                    cfg.loss.eps_mix,
                )
                if not math.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite classifier loss at epoch {epoch}, step {step}, domain {k}"
                    )
                total_dw += dw
                total_db += db
            new_w, new_b = nn.adam_step(state, clf.params(), [total_dw, total_db], lr)
            clf = nn.LinearClassifier(W=new_w, b=new_b)
    return clf


def train_probe(datasets: list[DomainDataset], cfg: TrainConfig) -> nn.LinearClassifier:
    """Source-only linear probe: the no-augmenter baseline.

    Same head, same stage-two optimizer and schedule, trained on the raw
    pooled source embeddings alone.
    """
    datasets = _sorted_datasets(datasets)
    m = datasets[0].embeddings.dim
    hidden = cfg.hidden or max(1, m // 2)
    _, clf = nn.init_params(cfg.seed, m, hidden, datasets[0].num_classes, len(datasets))
    state = nn.AdamState.init(clf.params())
    originals = {d.domain_name: d.embeddings.f64() for d in datasets}
    labels = {d.domain_name: d.labels.astype(np.intp) for d in datasets}
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x99]))
    n_min = min(len(d.labels) for d in datasets)
    batch, steps = _batch_plan(n_min, cfg.batch_size)
    for epoch in range(cfg.epochs_stage2):
        lr = nn.lr_at_epoch(cfg.lr_stage2, list(cfg.milestones_stage2), cfg.gamma_stage2, epoch)
        perms = {d.domain_name: rng.permutation(len(d.labels)) for d in datasets}
        for step in range(steps):
            total_dw = np.zeros_like(clf.W)
            total_db = np.zeros_like(clf.b)
            for ds in datasets:
                k = ds.domain_name
                rows = perms[k][step * batch : (step + 1) * batch]
                _, (dw, db) = classifier_loss(
                    clf, originals[k][rows], originals[k][rows], labels[k][rows], 1.0
                )
                total_dw += dw
                total_db += db
            new_w, new_b = nn.adam_step(state, clf.params(), [total_dw, total_db], lr)
            clf = nn.LinearClassifier(W=new_w, b=new_b)
    return clf


def aggregation_weights(
    bank: PromptBank, loss_cfg: LossConfig, mode: str = "as-written"
) -> dict[str, float]:
    """Per-source weights from text-space transport distances to the target.

    ``as-written`` normalizes the distances directly (larger distance,
    larger weight); ``inverse`` uses reciprocal distances so that nearer
    sources dominate. Both are exposed because they answer the question
    "which sources matter" in opposite ways; see the README.
    """
    names = sorted(bank.source_names)
    dist = {
        name: max(
            0.0,
            ot.text_weight_distance(
                bank, name, zeta=loss_cfg.zeta, lam=loss_cfg.lam, sigma=loss_cfg.sigma
            ),
        )
        for name in names
    }
    if mode == "as-written":
        total = sum(dist.values())
        if total <= 0.0:
            return {name: 1.0 / len(names) for name in names}
        weights = {name: d / total for name, d in dist.items()}
    elif mode == "inverse":
        zeros = [name for name, d in dist.items() if d <= 0.0]
        if zeros:
            return {name: (1.0 / len(zeros) if name in zeros else 0.0) for name in names}
        inv = {name: 1.0 / d for name, d in dist.items()}
        total = sum(inv.values())
        weights = {name: v / total for name, v in inv.items()}
    else:
        raise ValueError(f"unknown weighting mode {mode!r}")
    # fixed-order renormalization so the simplex invariant holds exactly
    total = sum(weights[name] for name in names)
    return {name: weights[name] / total for name in names}


def _aggregate(x: np.ndarray, model: AdaptedModel) -> np.ndarray:
    """Weighted sum of normalized augmenter outputs, in sorted-name order."""
    agg = np.zeros_like(x)
    for name in model.source_names:
        out, _ = nn.augmenter_forward(model.augmenters[name], x, normalize=True)
        agg += model.weights[name] * out
    return agg


def predict_batch(x: np.ndarray, model: AdaptedModel) -> tuple[np.ndarray, np.ndarray]:
    logits = nn.linear_forward(model.classifier, _aggregate(x, model))
    return logits.argmax(axis=1), logits


def predict(x: np.ndarray, model: AdaptedModel) -> tuple[int, np.ndarray]:
    """Aggregated prediction for a single embedding row (lowest-index ties)."""
    if x.ndim != 1 or x.shape[0] != model.classifier.dim:
        raise ValueError(f"query shape {x.shape} does not match model dim")
    pred, logits = predict_batch(x[None, :], model)
    return int(pred[0]), logits[0]


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray


def evaluate(
    dataset: DomainDataset, model: AdaptedModel, use_aggregation: bool
) -> EvalResult:
    """Accuracy and confusion counts.

    In-domain evaluation (aggregation off) routes every sample through its
    own domain's augmenter, matching the signal the classifier was trained
    on; out-of-domain evaluation uses the aggregated prediction.
    """
    x = dataset.embeddings.f64()
    if use_aggregation:
        pred, _ = predict_batch(x, model)
    else:
        if dataset.domain_name not in model.augmenters:
            raise KeyError(f"no augmenter for domain {dataset.domain_name!r}")
        out, _ = nn.augmenter_forward(model.augmenters[dataset.domain_name], x, normalize=True)
        pred = nn.linear_forward(model.classifier, out).argmax(axis=1)
    c = dataset.num_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (dataset.labels.astype(np.intp), pred), 1)
    return EvalResult(accuracy=float((pred == dataset.labels).mean()), confusion=confusion)


def train_full(
    datasets: list[DomainDataset], bank: PromptBank, cfg: TrainConfig
) -> tuple[AdaptedModel, dict[str, list[dict[str, float]]]]:
    """Both stages plus aggregation weights."""
    augs, history = train_augmenters(datasets, bank, cfg)
    clf = train_classifier(datasets, augs, cfg)
    weights = aggregation_weights(bank, cfg.loss, cfg.weighting)
    model = AdaptedModel(
        augmenters=augs,
        classifier=clf,
        weights=weights,
        config=cfg,
        target_name=bank.target_name,
    )
    return model, history


def nearest_neighbor(
    query: np.ndarray, dataset: DomainDataset, augmenter: nn.Augmenter | None = None
) -> tuple[int, float]:
    """Index and distance of the Euclidean nearest dataset row.

    The query is optionally pushed through an augmenter first; ties break
    to the lowest index.
    """
    q = np.asarray(query, dtype=np.float64)
    if augmenter is not None:
        q = nn.augmenter_forward(augmenter, q[None, :], normalize=True)[0][0]
    dists = np.linalg.norm(dataset.embeddings.f64() - q, axis=1)
    idx = int(dists.argmin())
    return idx, float(dists[idx])


def _misalignment_rate(out: np.ndarray, labels: np.ndarray, class_text: np.ndarray) -> float:
    """1 - accuracy of nearest-class-text classification of the rows."""
    pred = (out @ class_text.T).argmax(axis=1)
    return float((pred != labels).mean())


@dataclass
class BoundReport:
    """All terms of the target-error bound, assembled on synthetic data."""

    source_error: float
    kernel_mean_norm: float
    pairwise_wasserstein: float
    deviation_terms: dict[str, float]
    theta: float
    rhs: float
    target_error: float
    delta: float
    sigma_prime: float

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.sigma_prime < math.sqrt(2.0):
            raise ValueError(f"sigma_prime must lie in (0, sqrt(2)), got {self.sigma_prime}")
        for name in ("source_error", "kernel_mean_norm", "pairwise_wasserstein", "theta", "rhs", "target_error"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")


def _train_oracle_augmenter(
    datasets: list[DomainDataset],
    target_samples: DomainDataset,
    bank: PromptBank,
    cfg: TrainConfig,
    epochs: int,
) -> nn.Augmenter:
    """Fit a single augmenter on sources plus target with the class CE loss.

    This estimates the best jointly-achievable alignment, i.e. the ideal
    hypothesis whose combined error the bound's residual term measures.
    """
    x = np.vstack([d.embeddings.f64() for d in datasets] + [target_samples.embeddings.f64()])
    y = np.concatenate([d.labels for d in datasets] + [target_samples.labels]).astype(np.intp)
    m = x.shape[1]
    hidden = cfg.hidden or max(1, m // 2)
    augs, _ = nn.init_params(cfg.seed + 0x0B, m, hidden, bank.num_classes, 1)
    aug = augs[0]
    state = nn.AdamState.init(aug.params())
    class_text = bank.class_text.f64()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x0B]))
    batch, steps = _batch_plan(len(y), cfg.batch_size)
    for epoch in range(epochs):
        lr = nn.lr_at_epoch(cfg.lr_stage1, list(cfg.milestones_stage1), cfg.gamma_stage1, epoch)
        perm = rng.permutation(len(y))
        for step in range(steps):
            rows = perm[step * batch : (step + 1) * batch]
            out, cache = nn.augmenter_forward(aug, x[rows], normalize=True)
            _, d_out = class_alignment(out, y[rows], class_text, cfg.loss.tau)
            grads, _ = nn.augmenter_backward(aug, cache, d_out)
            aug = aug.with_params(nn.adam_step(state, aug.params(), grads.as_list(), lr))
    return aug


def generalization_bound(
    datasets: list[DomainDataset],
    target_samples: DomainDataset,
    model: AdaptedModel,
    bank: PromptBank,
    delta: float,
    sigma_prime: float,
    cfg: TrainConfig,
    oracle_epochs: int = 5,
) -> BoundReport:
    """Assemble the empirical target-error bound and its measured left side.

    Source error is the weighted misalignment rate of the augmented source
    embeddings against the class texts; the kernel-mean norm is estimated
    from the Gram mean of the cost function on the target sample; pairwise
    transport runs on the full augmented datasets; the residual term is
    estimated by actually training an oracle augmenter on source + target.
    Requires held-out target samples, so it is a synthetic-world diagnostic.
    """
    if target_samples is None:
        raise ValueError("bound diagnostic needs held-out target samples")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not 0.0 < sigma_prime < math.sqrt(2.0):
        raise ValueError(f"sigma_prime must lie in (0, sqrt(2)), got {sigma_prime}")
    datasets = _sorted_datasets(datasets)
    loss_cfg = cfg.effective_loss()
    class_text = bank.class_text.f64()

    # weighted source misalignment
    names = [d.domain_name for d in datasets]
    w = model.weights
    outs = {}
    errs = {}
    for ds in datasets:
        out, _ = nn.augmenter_forward(model.augmenters[ds.domain_name], ds.embeddings.f64(), True)
        outs[ds.domain_name] = out
        errs[ds.domain_name] = _misalignment_rate(out, ds.labels, class_text)
    source_error = sum(w[name] * errs[name] for name in names)

    z = target_samples.embeddings.f64()
    t_z = class_text[target_samples.labels.astype(np.intp)]
    gram = ot.pairwise_cost(z, z, t_z, t_z, loss_cfg.lam, loss_cfg.sigma).values
    kernel_mean_norm = float(np.sqrt(gram.mean()))

    pairwise = 0.0
    n = {d.domain_name: len(d.labels) for d in datasets}

    def deviation(n_k: int) -> float:
        return math.exp(
            (1.0 + loss_cfg.lam)
            * math.log(1.0 / delta)
            / (loss_cfg.sigma**2 * n_k * sigma_prime)
        )

    deviation_terms = {name: deviation(n[name]) for name in names}
    bracket = 0.0
    for i, di in enumerate(datasets):
        for dj in datasets[i + 1 :]:
            value, _, _ = ot.wasserstein_pair(
                Batch(outs[di.domain_name], di.labels.astype(np.intp)),
                Batch(outs[dj.domain_name], dj.labels.astype(np.intp)),
                bank,
                zeta=loss_cfg.zeta,
                lam=loss_cfg.lam,
                sigma=loss_cfg.sigma,
            )
            ww = w[di.domain_name] * w[dj.domain_name]
            pairwise += ww * value
            bracket += ww * (
                value + deviation_terms[di.domain_name] + deviation_terms[dj.domain_name]
            )

    oracle = _train_oracle_augmenter(datasets, target_samples, bank, cfg, oracle_epochs)
    oracle_src = sum(
        w[ds.domain_name]
        * _misalignment_rate(
            nn.augmenter_forward(oracle, ds.embeddings.f64(), True)[0], ds.labels, class_text
        )
        for ds in datasets
    )
    oracle_tgt = _misalignment_rate(
        nn.augmenter_forward(oracle, z, True)[0], target_samples.labels, class_text
    )
    theta = oracle_src + oracle_tgt

    target_error = _misalignment_rate(_aggregate(z, model), target_samples.labels, class_text)
    rhs = source_error + kernel_mean_norm + theta + bracket
    return BoundReport(
        source_error=source_error,
        kernel_mean_norm=kernel_mean_norm,
        pairwise_wasserstein=pairwise,
        deviation_terms=deviation_terms,
        theta=theta,
        rhs=rhs,
        target_error=target_error,
        delta=delta,
        sigma_prime=sigma_prime,
    )


def zero_shot_aggregated(
    x: np.ndarray,
    augmenters: dict[str, nn.Augmenter],
    weights: dict[str, float],
    class_text: np.ndarray,
) -> np.ndarray:
    """Classify by similarity of the aggregated augmented embedding to class texts.

    Used by the ablation variants that stop before training a classifier.
    """
    agg = np.zeros_like(x)
    for name in sorted(augmenters):
        out, _ = nn.augmenter_forward(augmenters[name], x, normalize=True)
        agg += weights[name] * out
    return (agg @ class_text.T).argmax(axis=1)


ABLATION_VARIANTS = ("A", "B", "C", "D")


def run_ablation(
    datasets: list[DomainDataset],
    target: DomainDataset,
    bank: PromptBank,
    cfg: TrainConfig,
    variant: str,
) -> dict[str, float]:
    """One ablation configuration, reported as target/source accuracies.

    A: alignment loss only; B: + class CE; C: + distribution consistency.
    A-C skip the linear head and predict zero-shot from the aggregated
    augmented embedding; D is the full method with the trained head.
    """
    if variant not in ABLATION_VARIANTS:
        raise ValueError(f"unknown ablation variant {variant!r}")
    cfg = replace(
        cfg,
        enable_class_alignment=variant in ("B", "C", "D"),
        enable_distribution_consistency=variant in ("C", "D"),
    )
    datasets = _sorted_datasets(datasets)
    augs, _ = train_augmenters(datasets, bank, cfg)
    weights = aggregation_weights(bank, cfg.loss, cfg.weighting)
    metrics: dict[str, float] = {}
    if variant == "D":
        clf = train_classifier(datasets, augs, cfg)
        model = AdaptedModel(
            augmenters=augs,
            classifier=clf,
            weights=weights,
            config=cfg,
            target_name=bank.target_name,
        )
        metrics["target_accuracy"] = evaluate(target, model, use_aggregation=True).accuracy
        for ds in datasets:
            metrics[f"id_{ds.domain_name}_accuracy"] = evaluate(
                ds, model, use_aggregation=False
            ).accuracy
    else:
        class_text = bank.class_text.f64()
        pred = zero_shot_aggregated(target.embeddings.f64(), augs, weights, class_text)
        metrics["target_accuracy"] = float((pred == target.labels).mean())
        for ds in datasets:
            own, _ = nn.augmenter_forward(augs[ds.domain_name], ds.embeddings.f64(), True)
            metrics[f"id_{ds.domain_name}_accuracy"] = float(
                ((own @ class_text.T).argmax(axis=1) == ds.labels).mean()
            )
    return metrics


def save_model(directory, model: AdaptedModel) -> None:
    from dataclasses import asdict
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, aug in model.augmenters.items():
        nn.save_augmenter(directory, name, aug)
    nn.save_classifier(directory, model.classifier)
    any_aug = next(iter(model.augmenters.values()))
    manifest = {
        "dim": any_aug.dim,
        "hidden": any_aug.hidden,
        "num_classes": model.classifier.num_classes,
        "sources": list(model.source_names),
        "target": model.target_name,
        "weights": {name: model.weights[name] for name in model.source_names},
        "config": asdict(model.config),
    }
    nn.save_manifest(directory, manifest)


def load_model(directory) -> AdaptedModel:
    manifest = nn.load_manifest(directory)
    augmenters = {name: nn.load_augmenter(directory, name) for name in manifest["sources"]}
    classifier = nn.load_classifier(directory)
    cfg_dict = dict(manifest["config"])
    cfg_dict["loss"] = LossConfig(**cfg_dict["loss"])
    cfg_dict["milestones_stage1"] = tuple(cfg_dict["milestones_stage1"])
    cfg_dict["milestones_stage2"] = tuple(cfg_dict["milestones_stage2"])
    cfg = TrainConfig(**cfg_dict)
    return AdaptedModel(
        augmenters=augmenters,
        classifier=classifier,
        weights=dict(manifest["weights"]),
        config=cfg,
        target_name=manifest["target"],
    )
