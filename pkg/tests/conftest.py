import numpy as np
import pytest


def random_spd(rng, n, cond=None, spread=1.0):
    """Random SPD matrix; with ``cond`` the spectrum spans exactly [1, cond]."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    if cond is None:
        w = np.exp(spread * rng.normal(size=n))
    else:
        w = np.exp(np.linspace(0.0, np.log(cond), n))
        rng.shuffle(w)
    a = (q * w) @ q.T
    return 0.5 * (a + a.T)


def random_sym(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) * scale
    return 0.5 * (a + a.T)


def householder(v):
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    return np.eye(len(v)) - 2.0 * np.outer(v, v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
