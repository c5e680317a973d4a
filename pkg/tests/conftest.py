import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def normalized_rows(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    x = rng.normal(size=(rows, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def clustered_rows(
    rng: np.random.Generator,
    rows: int,
    dim: int,
    spread: float = 0.15,
    center: np.ndarray | None = None,
) -> np.ndarray:
    """Unit rows packed around a center (drawn if not given).

    Keeps the cost spread small so entropic solvers are well conditioned
    and tight tolerances are meaningful; batches that should be compared
    must share the center.
    """
    if center is None:
        center = rng.normal(size=dim)
        center /= np.linalg.norm(center)
    x = center + spread * rng.normal(size=(rows, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def shared_center(rng: np.random.Generator, dim: int) -> np.ndarray:
    c = rng.normal(size=dim)
    return c / np.linalg.norm(c)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
