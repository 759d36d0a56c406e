"""Dense linear-algebra primitives: D-norms, SPD checks, spectral clipping.

All matrices are plain ``numpy`` arrays; :class:`SpdMatrix` wraps one together
with its Cholesky factor and the eigenvalue-band certificate ``mu`` (every
eigenvalue lies in ``[1/mu, mu]``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import DimensionError, NumericalError


@dataclass(frozen=True)
class Tolerances:
    symmetry: float = 1e-12
    spd_residual: float = 1e-10
    invariant_slack: float = 1e-9
    membership: float = 1e-9
    kkt: float = 1e-8


TOL = Tolerances()

# above this size the full eigensolve in spectral_clip is replaced by a
# diagonal clamp plus Gershgorin shift
EIG_CLIP_MAX_N = 1024
# certificate checks are exact up to this size, sampled beyond it
EAGER_CERTIFY_MAX_N = 64


def as_vector(x, n=None):
    """Return ``x`` as a finite 1-D float array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        v = v.reshape(-1)
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"expected vector of length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise NumericalError("vector has non-finite entries")
    return v


def symmetrize(M):
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def is_symmetric(M, tol=TOL.symmetry):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    return bool(np.all(np.abs(M - M.T) <= tol * np.maximum(1.0, np.abs(M))))


def cholesky_or_none(M):
    try:
        return sla.cho_factor(M, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError):
        return None


def is_spd(M):
    return is_symmetric(M) and cholesky_or_none(M) is not None


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """Symmetric positive definite matrix with eigenvalue-band certificate.

    ``mu`` is the claimed bound: all eigenvalues in ``[1/mu, mu]``. Pass
    ``mu=None`` to have the tightest certificate computed from the spectrum
    (useful for matrices taken literally from a problem, e.g. ``2V``).
    """

    entries: np.ndarray
    mu: float | None = None
    check_mu: bool = True
    _chol: tuple = field(init=False, repr=False)

    def __post_init__(self):
        M = np.array(self.entries, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionError(f"SpdMatrix needs a square matrix, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise NumericalError("matrix has non-finite entries")
        if not is_symmetric(M):
            raise NumericalError("matrix is not symmetric")
        M = symmetrize(M)
        M.setflags(write=False)
        chol = cholesky_or_none(M)
        if chol is None:
            raise NumericalError("matrix is not positive definite (Cholesky failed)")
        object.__setattr__(self, "entries", M)
        object.__setattr__(self, "_chol", chol)
        if self.mu is None:
            object.__setattr__(self, "mu", tightest_mu(M))
        elif self.mu < 1.0:
            raise ValueError(f"mu certificate must be >= 1, got {self.mu}")
        elif self.check_mu:
            certify_mu(M, self.mu)

    @property
    def n(self):
        return self.entries.shape[0]

    def __matmul__(self, v):
        return self.entries @ v

    def solve(self, v):
        return apply_inverse(self, v)

    def inverse(self):
        """Return ``D^{-1}`` as an SpdMatrix; the class is closed under inversion."""
        source = getattr(self, "inverse_of", None)
        if source is not None:
            return source
        cached = getattr(self, "_inverse", None)
        if cached is not None:
            return cached
        inv = sla.cho_solve(self._chol, np.eye(self.n), check_finite=False)
        out = SpdMatrix(symmetrize(inv), mu=self.mu, check_mu=False)
        # lets the band projection work from this matrix's factor directly
        object.__setattr__(out, "inverse_of", self)
        object.__setattr__(self, "_inverse", out)
        return out

    def eigvalsh(self):
        return np.linalg.eigvalsh(self.entries)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), mu=1.0)


def eigen_band(M):
    """Return (smallest, largest) eigenvalue of the symmetric matrix ``M``."""
    w = np.linalg.eigvalsh(symmetrize(M))
    return float(w[0]), float(w[-1])


def tightest_mu(M):
    lo, hi = eigen_band(M)
    if lo <= 0:
        raise NumericalError(f"matrix has non-positive eigenvalue {lo}")
    return max(1.0, hi, 1.0 / lo)


def certify_mu(M, mu, tol=TOL.invariant_slack, rng=None, samples=200):
    """Raise NumericalError unless every eigenvalue of ``M`` lies in ``[1/mu, mu]``.

    Exact for n <= 64; larger matrices are checked by Rayleigh quotients of
    random vectors, which can only detect violations, never prove membership.
    """
    n = M.shape[0]
    if n <= EAGER_CERTIFY_MAX_N:
        lo, hi = eigen_band(M)
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        X = rng.standard_normal((n, samples))
        X /= np.linalg.norm(X, axis=0)
        r = np.einsum("ij,ij->j", X, M @ X)
        lo, hi = float(r.min()), float(r.max())
    if lo < 1.0 / mu - tol or hi > mu + tol:
        raise NumericalError(
            f"eigenvalues [{lo:.6g}, {hi:.6g}] outside certificate band [{1 / mu:.6g}, {mu:.6g}]"
        )


def dnorm_sq(x, D):
    """Squared D-norm ``x^T D x``."""
    x = np.asarray(x, dtype=float)
    M = D.entries if isinstance(D, SpdMatrix) else np.asarray(D, dtype=float)
    if M.shape != (x.shape[0], x.shape[0]):
        raise DimensionError(f"vector of length {x.shape[0]} vs matrix {M.shape}")
    return max(float(x @ (M @ x)), 0.0)


def apply_inverse(D, v):
    """Solve ``D w = v`` with the stored Cholesky factor."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != D.n:
        raise DimensionError(f"vector of length {v.shape[0]} vs matrix of order {D.n}")
    w = sla.cho_solve(D._chol, v, check_finite=False)
    if not np.all(np.isfinite(w)):
        raise NumericalError("non-finite solution in apply_inverse")
    return w


def spectral_clip(M, lo, hi):
    """Clamp the eigenvalues of ``(M + M^T)/2`` into ``[lo, hi]``.

    For n > EIG_CLIP_MAX_N only the diagonal is clamped and a Gershgorin
    shift keeps the result inside the band.
    """
    if not (lo > 0 and hi >= lo):
        raise ValueError(f"need 0 < lo <= hi, got lo={lo}, hi={hi}")
    S = symmetrize(M)
    mu = max(hi, 1.0 / lo)
    if S.shape[0] > EIG_CLIP_MAX_N:
        return SpdMatrix(_gershgorin_clip(S, lo, hi), mu=mu, check_mu=False)
    try:
        w, Q = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    w = np.clip(w, lo, hi)
    C = symmetrize((Q * w) @ Q.T)
    return SpdMatrix(C, mu=mu)


def _gershgorin_clip(S, lo, hi):
    d = np.clip(np.diag(S), lo, hi)
    off = S - np.diag(np.diag(S))
    radius = np.abs(off).sum(axis=1)
    # shrink the off-diagonal part until every Gershgorin disc fits the band
    room = np.minimum(d - lo, hi - d)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(radius > 0, room / radius, 1.0)
    scale = float(np.clip(ratio.min(), 0.0, 1.0))
    return np.diag(d) + scale * off
