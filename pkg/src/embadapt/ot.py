"""Entropic optimal transport between labeled embedding batches.

The cost of moving one sample onto another is
``exp((|x_a - x_b|^2 + lambda |t_a - t_b|^2) / (2 sigma^2))`` where t_a,
t_b are the text embeddings of the samples' classes, so transport across
semantically distant classes is penalized more than across nearby ones.
Entries are always >= 1, which is why the Sinkhorn solver must run in the
log domain: the kernel exp(-zeta C) underflows for any useful zeta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .embstore import PromptBank


class Batch(NamedTuple):
    """A labeled embedding batch (rows of x paired with integer labels)."""

    x: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class CostMatrix:
    values: np.ndarray
    lam: float
    sigma: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class TransportPlan:
    """A coupling with its marginals, convergence info and entropic value."""

    plan: np.ndarray
    a: np.ndarray
    b: np.ndarray
    converged: bool
    iterations: int
    marginal_error: float
    value: float

    def __post_init__(self):
        if np.any(self.plan < 0.0):
            raise ValueError("transport plan has negative entries")


def pairwise_cost(
    xi: np.ndarray,
    xj: np.ndarray,
    ti: np.ndarray,
    tj: np.ndarray,
    lam: float,
    sigma: float,
) -> CostMatrix:
    """Cost matrix between two batches given their per-row class texts."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if lam < 0.0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if xi.shape[1] != xj.shape[1] or ti.shape[1] != tj.shape[1]:
        raise ValueError("embedding dims of the two batches differ")
    if ti.shape[0] != xi.shape[0] or tj.shape[0] != xj.shape[0]:
        raise ValueError("text rows must align one-to-one with embedding rows")
    sq = _kernels.pairwise_sq_dists(np.ascontiguousarray(xi), np.ascontiguousarray(xj))
    if lam != 0.0:
        sq = sq + lam * _kernels.pairwise_sq_dists(
            np.ascontiguousarray(ti), np.ascontiguousarray(tj)
        )
    return CostMatrix(values=np.exp(sq / (2.0 * sigma * sigma)), lam=lam, sigma=sigma)


def entropy(plan: np.ndarray) -> float:
    """H(J) = -sum J log J with the 0 log 0 := 0 convention."""
    positive = plan[plan > 0.0]
    return float(-(positive * np.log(positive)).sum())


def sinkhorn(
    cost: CostMatrix | np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    zeta: float = 10.0,
    max_iter: int = 1000,
    tol: float = 1e-6,
) -> TransportPlan:
    """Entropic OT: minimize <C, J> - (1/zeta) H(J) over couplings of (a, b).

    Non-convergence within max_iter is reported through the plan's
    ``converged`` flag rather than raised, so a training loop can proceed
    with the best iterate.
    """
    c = cost.values if isinstance(cost, CostMatrix) else cost
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if zeta <= 0.0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    if a.shape != (c.shape[0],) or b.shape != (c.shape[1],):
        raise ValueError("marginal lengths do not match the cost matrix")
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise ValueError("marginals must be nonnegative")
    if abs(a.sum() - 1.0) > 1e-9 or abs(b.sum() - 1.0) > 1e-9:
        raise ValueError("marginals must each sum to 1")
    plan, iterations, converged, err = _kernels.sinkhorn_log(
        np.ascontiguousarray(c, dtype=np.float64), a, b, float(zeta), int(max_iter), float(tol)
    )
    value = float((c * plan).sum()) - entropy(plan) / zeta
    return TransportPlan(
        plan=plan,
        a=a,
        b=b,
        converged=bool(converged),
        iterations=int(iterations),
        marginal_error=float(err),
        value=value,
    )


def wasserstein_pair(
    di: Batch,
    dj: Batch,
    bank: PromptBank,
    zeta: float = 10.0,
    lam: float = 1.0,
    sigma: float = 1.0,
    max_iter: int = 1000,
    tol: float = 1e-6,
) -> tuple[float, TransportPlan, CostMatrix]:
    """Entropic distance between two labeled batches under the text-aware cost.

    Class texts are looked up per sample from the bank; marginals are
    uniform over batch samples.
    """
    if di.x.shape[0] < 1 or dj.x.shape[0] < 1:
        raise ValueError("batches must be nonempty")
    class_text = bank.class_text.f64()
    ti = class_text[np.asarray(di.labels, dtype=np.intp)]
    tj = class_text[np.asarray(dj.labels, dtype=np.intp)]
    cost = pairwise_cost(di.x, dj.x, ti, tj, lam, sigma)
    n_i, n_j = cost.shape
    plan = sinkhorn(
        cost,
        np.full(n_i, 1.0 / n_i),
        np.full(n_j, 1.0 / n_j),
        zeta=zeta,
        max_iter=max_iter,
        tol=tol,
    )
    return plan.value, plan, cost


def text_weight_distance(
    bank: PromptBank,
    source_name: str,
    zeta: float = 10.0,
    lam: float = 1.0,
    sigma: float = 1.0,
) -> float:
    """Entropic distance between a source's composed prompts and the target's.

    Both prompt sets are treated as uniform discrete distributions over the
    classes; the cost couples composed-prompt distance with bare class-text
    distance exactly like the sample-level cost.
    """
    if source_name not in bank.composed_text:
        raise KeyError(f"unknown source domain {source_name!r}")
    src = bank.composed_text[source_name].f64()
    tgt = bank.target_composed_text.f64()
    class_text = bank.class_text.f64()
    cost = pairwise_cost(src, tgt, class_text, class_text, lam, sigma)
    n = bank.num_classes
    uniform = np.full(n, 1.0 / n)
    return sinkhorn(cost, uniform, uniform, zeta=zeta).value
