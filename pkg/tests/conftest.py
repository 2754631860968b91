import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def legendre_oracle(m, s):
    """Brute-force three-term recurrence, independent of the package."""
    p0, p1 = np.ones_like(s), s
    if m == 0:
        return p0
    for n in range(1, m):
        p0, p1 = p1, ((2 * n + 1) * s * p1 - n * p0) / (n + 1)
    return p1


def composite_gauss(f, a, b, pieces=100, nodes=64):
    """High-resolution oracle: ``nodes``-point Gauss on ``pieces`` equal sub-segments."""
    z, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(a, b, pieces + 1)
    h = np.diff(edges)
    x = 0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 * h[:, None] * z
    return float(np.sum(0.5 * h[:, None] * w * f(x)))
