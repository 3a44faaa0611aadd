import numpy as np
import pytest

from amfkit.config import RunConfig
from amfkit.synth import make_spec, generate


@pytest.fixture(scope="session")
def small_market():
    """220-week market, 6 stocks, moderate noise; shared by read-only tests."""
    spec = make_spec(n_weeks=220, n_factors=12, n_stocks=6, noise_sd=0.5, seed=11,
                     betas_per_stock=2)
    prices, factors, truth = generate(spec)
    return spec, prices, factors, truth


@pytest.fixture(scope="session")
def fast_cfg():
    return RunConfig(first_year=2007, last_year=2009, n_folds=5, grid_size=40)


def zero_mean_orthonormal(rng: np.random.Generator, n: int, p: int) -> np.ndarray:
    """Columns orthogonal to each other and to the constant, mean-square one,
    so internal standardization is (numerically) the identity."""
    raw = rng.standard_normal((n, p))
    raw -= raw.mean(axis=0)
    q, _ = np.linalg.qr(raw)
    q -= q.mean(axis=0)
    q, _ = np.linalg.qr(q)
    return q * np.sqrt(n)


def bhy_oracle(p):
    """Independent step-up FDR evaluation: literal loops, no vectorization."""
    m = len(p)
    c = sum(1.0 / i for i in range(1, m + 1))
    order = sorted(range(m), key=lambda i: p[i])
    raw = [m * c * p[order[k]] / (k + 1) for k in range(m)]
    q_sorted = [0.0] * m
    running = float("inf")
    for k in reversed(range(m)):
        running = min(running, raw[k])
        q_sorted[k] = min(running, 1.0)
    q = [0.0] * m
    for k, idx in enumerate(order):
        q[idx] = q_sorted[k]
    return np.array(q)
