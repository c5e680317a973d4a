"""Independent reference implementations used as test oracles.

Everything here is deliberately written against the grain of the library:
plain Python loops, math-module scalars, or generic brute force. None of
it imports the code paths it checks.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def finite_difference(f, params: list[np.ndarray], step: float = 1e-4) -> list[np.ndarray]:
    """Central finite differences of a scalar function of parameter arrays."""
    grads = []
    for idx, p in enumerate(params):
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = f(params)
            flat[j] = orig - step
            down = f(params)
            flat[j] = orig
            gflat[j] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def relative_error(analytic: list[np.ndarray], numeric: list[np.ndarray]) -> float:
    """Global relative L2 error between two gradient pytrees."""
    a = np.concatenate([g.reshape(-1) for g in analytic])
    n = np.concatenate([g.reshape(-1) for g in numeric])
    denom = max(np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def mlp_forward_scalar(w1, b1, w2, b2, x_row, normalize=False):
    """Scalar-loop evaluation of W2 relu(W1 x + b1) + b2 for one row."""
    h = len(b1)
    m = len(b2)
    hidden = []
    for i in range(h):
        s = b1[i]
        for j in range(len(x_row)):
            s += w1[i][j] * x_row[j]
        hidden.append(max(s, 0.0))
    out = []
    for i in range(m):
        s = b2[i]
        for j in range(h):
            s += w2[i][j] * hidden[j]
        out.append(s)
    if normalize:
        norm = math.sqrt(sum(v * v for v in out))
        out = [v / norm for v in out]
    return out


def linear_forward_scalar(w, b, x_row):
    return [b[i] + sum(w[i][j] * x_row[j] for j in range(len(x_row))) for i in range(len(b))]


def cost_scalar(xa, xb, ta, tb, lam, sigma):
    """One cost entry evaluated with plain Python arithmetic."""
    d2 = sum((xa[i] - xb[i]) ** 2 for i in range(len(xa)))
    t2 = sum((ta[i] - tb[i]) ** 2 for i in range(len(ta)))
    return math.exp((d2 + lam * t2) / (2.0 * sigma * sigma))


def sinkhorn_scalar(cost, a, b, zeta, max_iter=20000, tol=1e-10):
    """Independent log-domain fixed-point solver in plain Python loops.

    Returns (plan, entropic value); runs the alternating scaling to a
    much tighter marginal tolerance than the production solver.
    """
    n = len(a)
    m = len(b)
    u = [0.0] * n
    v = [0.0] * m

    def lse(vals):
        peak = max(vals)
        return peak + math.log(sum(math.exp(t - peak) for t in vals))

    for _ in range(max_iter):
        for i in range(n):
            u[i] = math.log(a[i]) - lse([-zeta * cost[i][j] + v[j] for j in range(m)])
        for j in range(m):
            v[j] = math.log(b[j]) - lse([-zeta * cost[i][j] + u[i] for i in range(n)])
        plan = [
            [math.exp(-zeta * cost[i][j] + u[i] + v[j]) for j in range(m)] for i in range(n)
        ]
        err = sum(abs(sum(plan[i]) - a[i]) for i in range(n))
        err += sum(abs(sum(plan[i][j] for i in range(n)) - b[j]) for j in range(m))
        if err < tol:
            break
    transport = sum(cost[i][j] * plan[i][j] for i in range(n) for j in range(m))
    entropy = -sum(
        plan[i][j] * math.log(plan[i][j])
        for i in range(n)
        for j in range(m)
        if plan[i][j] > 0.0
    )
    value = transport - entropy / zeta
    return plan, value


def entropic_value_projected_gradient(
    cost: np.ndarray, zeta: float, iters: int = 6000, lr: float = 0.01
) -> float:
    """Brute-force entropic minimum by projected gradient on the coupling.

    Minimizes <C, J> + (1/zeta) sum J log J over couplings with uniform
    marginals, projecting onto the transport polytope with Dykstra's
    algorithm after every step. Needs well-conditioned instances (small
    zeta * cost spread) so the optimal coupling keeps all entries far
    from zero; the convex objective then makes the result unique.
    """
    n, m = cost.shape
    a = np.full(n, 1.0 / n)
    b = np.full(m, 1.0 / m)
    j = np.outer(a, b)
    floor = 1e-300
    for _ in range(iters):
        grad = cost + (np.log(np.maximum(j, floor)) + 1.0) / zeta
        j = _dykstra_project(j - lr * grad, a, b)
        j = np.maximum(j, 0.0)
    j = np.maximum(j, floor)
    return float((cost * j).sum() + (j * np.log(j)).sum() / zeta)


def _dykstra_project(x: np.ndarray, a: np.ndarray, b: np.ndarray, rounds: int = 100) -> np.ndarray:
    """Euclidean projection onto {J >= 0, J1 = a, J^T 1 = b} via Dykstra."""
    n, m = x.shape
    p = np.zeros_like(x)

    def rows(z):
        return z + (a - z.sum(axis=1))[:, None] / m

    def cols(z):
        return z + (b - z.sum(axis=0))[None, :] / n

    for _ in range(rounds):
        prev = x
        # affine sets need no correction terms; the orthant does
        x = cols(rows(x))
        y = np.maximum(x + p, 0.0)
        p = x + p - y
        x = y
        if np.abs(x - prev).max() < 1e-15:
            break
    return cols(rows(x))


def lp_transport_uniform(cost: np.ndarray) -> float:
    """Exact unregularized transport value for uniform marginals, n <= 4.

    The vertices of the transport polytope with uniform marginals are the
    permutation matrices scaled by 1/n, so exhaustive enumeration solves
    the LP exactly.
    """
    n, m = cost.shape
    if n != m or n > 4:
        raise ValueError("vertex enumeration oracle needs square cost with n <= 4")
    best = math.inf
    for perm in itertools.permutations(range(n)):
        value = sum(cost[i][perm[i]] for i in range(n)) / n
        best = min(best, value)
    return float(best)
