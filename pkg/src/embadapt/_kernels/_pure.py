"""Pure-numpy fallback for the compiled kernels."""

import numpy as np


def pairwise_sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between all row pairs of ``x`` and ``y``.

    Computed from explicit differences so that identical rows give an
    exact zero (the expanded ||x||^2 + ||y||^2 - 2xy form does not).
    """
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("abk,abk->ab", diff, diff)


def sinkhorn_log(
    cost: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    zeta: float,
    max_iter: int,
    tol: float,
) -> tuple[np.ndarray, int, bool, float]:
    """Log-domain Sinkhorn scaling on the kernel exp(-zeta * cost).

    Returns ``(plan, iterations, converged, marginal_error)`` where the
    error is the larger of the two L1 marginal deviations. The naive
    kernel-domain iteration underflows for the cost matrices used here
    (entries >= 1), hence the log-sum-exp form.
    """
    log_k = -zeta * cost
    log_a = np.log(a)
    log_b = np.log(b)
    u = np.zeros(cost.shape[0])
    v = np.zeros(cost.shape[1])

    err = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        u = log_a - _lse_rows(log_k + v[None, :])
        v = log_b - _lse_cols(log_k + u[:, None])
        plan = np.exp(log_k + u[:, None] + v[None, :])
        err = max(
            float(np.abs(plan.sum(axis=1) - a).sum()),
            float(np.abs(plan.sum(axis=0) - b).sum()),
        )
        if err < tol:
            return plan, it, True, err
    plan = np.exp(log_k + u[:, None] + v[None, :])
    return plan, it, False, err


def _lse_rows(m: np.ndarray) -> np.ndarray:
    peak = m.max(axis=1)
    return peak + np.log(np.exp(m - peak[:, None]).sum(axis=1))


def _lse_cols(m: np.ndarray) -> np.ndarray:
    peak = m.max(axis=0)
    return peak + np.log(np.exp(m - peak[None, :]).sum(axis=0))
