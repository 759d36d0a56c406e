import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_spd
from sgmopt.errors import DimensionError, NumericalError
from sgmopt.linalg import (
    SpdMatrix,
    apply_inverse,
    certify_mu,
    dnorm_sq,
    eigen_band,
    is_spd,
    spectral_clip,
    tightest_mu,
)


class TestSpdMatrix:
    def test_rejects_non_spd(self):
        with pytest.raises(NumericalError):
            SpdMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_asymmetric(self):
        with pytest.raises(NumericalError):
            SpdMatrix(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            SpdMatrix(np.ones((2, 3)))

    def test_tightest_certificate(self):
        D = SpdMatrix(np.diag([0.5, 3.0]))
        assert D.mu == pytest.approx(3.0)

    def test_bad_certificate_raises(self):
        with pytest.raises(NumericalError):
            SpdMatrix(np.diag([0.5, 3.0]), mu=2.0)

    def test_inverse_round_trip(self, rng):
        M = random_spd(rng, 6)
        D = SpdMatrix(M)
        Dinv = D.inverse()
        assert np.allclose(Dinv.entries @ M, np.eye(6), atol=1e-10)
        assert Dinv.inverse() is D
        assert Dinv.mu == D.mu

    def test_solve(self, rng):
        M = random_spd(rng, 5)
        v = rng.standard_normal(5)
        assert np.allclose(M @ apply_inverse(SpdMatrix(M), v), v)


def test_dnorm_matches_definition(rng):
    M = random_spd(rng, 4)
    x = rng.standard_normal(4)
    assert dnorm_sq(x, M) == pytest.approx(float(x @ M @ x))
    assert dnorm_sq(x, SpdMatrix(M)) == pytest.approx(float(x @ M @ x))


def test_dnorm_dimension_mismatch():
    with pytest.raises(DimensionError):
        dnorm_sq(np.ones(3), np.eye(2))


def test_certify_mu_sampled_branch_detects_violation():
    # above the exact-check size only Rayleigh quotients are sampled; a uniform shift is always caught
    M = 3.0 * np.eye(100)
    with pytest.raises(NumericalError):
        certify_mu(M, 2.0)
    certify_mu(1.5 * np.eye(100), 2.0)


def test_tightest_mu():
    assert tightest_mu(np.diag([0.25, 2.0])) == pytest.approx(4.0)


def test_spectral_clip_indefinite():
    # eigenvalues 3 and -1 clip to 2 and 0.5
    M = np.array([[1.0, 2.0], [2.0, 1.0]])
    C = spectral_clip(M, 0.5, 2.0)
    lo, hi = eigen_band(C.entries)
    assert lo == pytest.approx(0.5) and hi == pytest.approx(2.0)
    v = np.array([1.0, 1.0]) / np.sqrt(2)
    assert float(v @ C.entries @ v) == pytest.approx(2.0)


def test_spectral_clip_bad_band():
    with pytest.raises(ValueError):
        spectral_clip(np.eye(2), 0.0, 1.0)


def test_spectral_clip_large_uses_gershgorin(rng):
    n = 1100
    A = rng.standard_normal((n, n)) * 0.01
    C = spectral_clip(A + A.T + 2 * np.eye(n), 0.8, 1.25)
    lo, hi = eigen_band(C.entries)
    assert lo >= 0.8 - 1e-12 and hi <= 1.25 + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1), st.floats(1.01, 10.0))
def test_spectral_clip_lands_in_band(n, seed, mu):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) * 3
    C = spectral_clip(A, 1.0 / mu, mu)
    lo, hi = eigen_band(C.entries)
    assert lo >= 1.0 / mu - 1e-10 and hi <= mu + 1e-10
    assert is_spd(C.entries)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_dnorm_nonnegative_and_homogeneous(n, seed):
    rng = np.random.default_rng(seed)
    M = random_spd(rng, n)
    x = rng.standard_normal(n)
    t = rng.uniform(-3, 3)
    assert dnorm_sq(x, M) >= 0
    assert dnorm_sq(t * x, M) == pytest.approx(t * t * dnorm_sq(x, M), rel=1e-10, abs=1e-14)


def test_spectral_clip_swap_matrix():
    # eigenvalue +1 lives on (1, 1)/sqrt(2), -1 clips up to 0.5 on (1, -1)/sqrt(2)
    C = spectral_clip(np.array([[0.0, 1.0], [1.0, 0.0]]), 0.5, 1.0)
    assert np.allclose(C.entries, [[0.75, 0.25], [0.25, 0.75]])


def test_spectral_clip_identity_unchanged():
    assert np.allclose(spectral_clip(np.eye(3), 0.8, 1.25).entries, np.eye(3))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_spectral_clip_idempotent(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    C = spectral_clip(A, 0.8, 1.25)
    assert np.abs(spectral_clip(C.entries, 0.8, 1.25).entries - C.entries).max() <= 1e-12


def test_spectral_clip_diagonal():
    assert np.allclose(spectral_clip(np.diag([-1.0, 10.0]), 0.8, 1.25).entries, np.diag([0.8, 1.25]))


@pytest.mark.parametrize("M,v,w", [
    (np.eye(2), [1.0, 2.0], [1.0, 2.0]),
    (np.diag([2.0, 4.0]), [2.0, 4.0], [1.0, 1.0]),
    (np.array([[2.0, 1.0], [1.0, 2.0]]), [3.0, 3.0], [1.0, 1.0]),
])
def test_apply_inverse_examples(M, v, w):
    assert np.allclose(apply_inverse(SpdMatrix(M), np.array(v)), w)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_norm_equivalence(n, seed):
    rng = np.random.default_rng(seed)
    D = SpdMatrix(random_spd(rng, n))
    x = rng.standard_normal(n)
    xx = float(x @ x)
    assert xx / D.mu - 1e-12 <= dnorm_sq(x, D) <= D.mu * xx + 1e-12
    assert np.allclose(apply_inverse(D, D @ x), x, rtol=1e-9, atol=1e-12)
