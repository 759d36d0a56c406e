import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, n, lo=-1.0, hi=1.0):
    """SPD matrix with log-eigenvalues uniform in ``[lo, hi]``."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    M = (Q * np.exp(rng.uniform(lo, hi, n))) @ Q.T
    return 0.5 * (M + M.T)
