"""Numeric kernels for the optimal-transport core.

The hot loops exist twice: a Cython extension (``_core``) and a pure-numpy
fallback (``_pure``), interchangeable up to floating-point summation order
and covered by parity tests. Bindings follow what the benchmark shows
(see benchmarks/bench_kernels.py): the pairwise distance kernel is roughly 4-20x
faster compiled, while the log-domain Sinkhorn loop is only faster
compiled on small problems - beyond roughly 50x50 numpy's vectorized
transcendentals beat scalar libc calls - so it dispatches on size at the
measured crossover. ``EMBADAPT_PURE=1`` forces the fallback everywhere.
"""

import importlib
import os

from . import _pure

_core = None
if not os.environ.get("EMBADAPT_PURE"):
    try:
        _core = importlib.import_module(__name__ + "._core")
    except ImportError:
        _core = None

BACKEND = "compiled" if _core is not None else "pure"

_SINKHORN_COMPILED_MAX_CELLS = 2500

if _core is not None:
    pairwise_sq_dists = _core.pairwise_sq_dists

    def sinkhorn_log(cost, a, b, zeta, max_iter, tol):
        if cost.size <= _SINKHORN_COMPILED_MAX_CELLS:
            return _core.sinkhorn_log(cost, a, b, zeta, max_iter, tol)
        return _pure.sinkhorn_log(cost, a, b, zeta, max_iter, tol)

else:
    pairwise_sq_dists = _pure.pairwise_sq_dists
    sinkhorn_log = _pure.sinkhorn_log

__all__ = ["BACKEND", "pairwise_sq_dists", "sinkhorn_log", "_pure"]
