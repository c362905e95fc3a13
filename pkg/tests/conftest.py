import sys
from pathlib import Path

import numpy as np
import pytest

# ─── allow imports from src/ ────────────────────────────────────
PROJECT_ROOT = Path(__file__).parent.parent.resolve()
SRC = PROJECT_ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))
# ───────────────────────────────────────────────────────────────


def numeric_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of scalar f at x (x is perturbed in place and restored)."""
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        up = f(x)
        x[idx] = old - h
        down = f(x)
        x[idx] = old
        grad[idx] = (up - down) / (2.0 * h)
    return grad


def planted_blocks(n: int = 300, blocks: int = 4, size: int = 10,
                   noise: float = 0.1, seed: int = 0) -> np.ndarray:
    """Features in ``blocks`` groups of noisy copies of independent factors, z-scored."""
    rng = np.random.default_rng(seed)
    factors = rng.standard_normal((n, blocks))
    X = np.repeat(factors, size, axis=1) + noise * rng.standard_normal((n, blocks * size))
    return (X - X.mean(axis=0)) / X.std(axis=0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def fd():
    return numeric_grad


@pytest.fixture
def blocks_X():
    return planted_blocks()
