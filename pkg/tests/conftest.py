import numpy as np
import pytest

from ellbounds import ResModel, make_generator, normalize_scatter

# (kind, param) for every catalog generator
CATALOG = [("gaussian", None), ("student-t", 4.0), ("gen-gaussian", 0.5)]


def make_model(kind, param=None, N=2, constraint="trace", mu=None, sigma=None):
    gen = make_generator(kind, param)
    mu = np.zeros(N) if mu is None else np.asarray(mu, dtype=float)
    sigma = np.eye(N) if sigma is None else normalize_scatter(np.asarray(sigma, float), constraint)
    return ResModel(mu=mu, sigma=sigma, generator=gen, constraint=constraint)


def random_spd(rng, N, spread=1.0):
    A = rng.standard_normal((N, N))
    return A @ A.T + (0.5 + spread) * np.eye(N)


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)
