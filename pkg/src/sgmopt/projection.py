"""Feasible sets and projections in a scaled metric.

``project_scaled(set, x, G)`` returns ``argmin_{y in K} 1/2 (y-x)^T G (y-x)``.
Callers that need the projection in the ``D^{-1}``-norm pass ``D.inverse()``;
the band projection notices that and reuses the factor of ``D``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import DimensionError, ProjectionError
from .linalg import TOL, SpdMatrix, as_vector, symmetrize

log = logging.getLogger(__name__)

MAX_INNER = 10_000


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    inner_iterations: int = 0
    kkt_residual: float = 0.0
    multiplier: float = 0.0


@dataclass(frozen=True, eq=False)
class BoxSet:
    lower: np.ndarray
    upper: np.ndarray

    # box projections are exact, so line-search trial points are held to the box itself
    trial_tol = 0.0

    def __post_init__(self):
        lo = as_vector(self.lower)
        hi = as_vector(self.upper, lo.shape[0])
        if np.any(lo > hi):
            i = int(np.argmax(lo > hi))
            raise ValueError(f"box lower[{i}]={lo[i]} exceeds upper[{i}]={hi[i]}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, n, radius=1.0):
        return cls(-radius * np.ones(n), radius * np.ones(n))

    @property
    def n(self):
        return self.lower.shape[0]

    def clamp(self, x):
        return np.minimum(np.maximum(x, self.lower), self.upper)

    def contains(self, x, tol=TOL.membership):
        return contains(self, x, tol)

    def project(self, x, G=None):
        return project_scaled(self, x, G)

    def max_feasible_step(self, x, d):
        """Largest t >= 0 with ``x + t d`` in the box (``inf`` if unbounded)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            up = np.where(d > 0, (self.upper - x) / d, np.inf)
            dn = np.where(d < 0, (self.lower - x) / d, np.inf)
        return float(max(0.0, min(up.min(), dn.min())))

    def sample(self, rng, count):
        return rng.uniform(self.lower, self.upper, size=(count, self.n))

    def bounding_radius(self):
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))


@dataclass(frozen=True, eq=False)
class QuadraticBandSet:
    """``{x : m <= 1/2 x^T B x + b^T x + beta <= M}`` with ``B`` positive semidefinite."""

    B: np.ndarray
    b: np.ndarray
    beta: float
    m: float
    M: float

    trial_tol = TOL.membership

    def __post_init__(self):
        b = as_vector(self.b)
        B = symmetrize(np.asarray(self.B, dtype=float))
        if B.shape != (b.shape[0], b.shape[0]):
            raise DimensionError(f"B has shape {B.shape}, b has length {b.shape[0]}")
        if not self.m < self.M:
            raise ValueError(f"band needs m < M, got m={self.m}, M={self.M}")
        if np.linalg.eigvalsh(B)[0] < -1e-10 * max(1.0, np.abs(B).max()):
            raise ValueError("B must be positive semidefinite")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)
        # cache of the eigendecomposition for the Euclidean metric
        object.__setattr__(self, "_euclid_eig", None)
        try:
            witness = project_scaled_band(self, np.zeros(b.shape[0]), None).point
        except ProjectionError as exc:
            raise ValueError(f"quadratic band set appears to be empty ({exc})") from exc
        if not self.contains(witness, 1e-8):
            raise ValueError("quadratic band set appears to be empty")

    @property
    def n(self):
        return self.b.shape[0]

    def q(self, x):
        return 0.5 * float(x @ (self.B @ x)) + float(self.b @ x) + self.beta

    def grad_q(self, x):
        return self.B @ x + self.b

    def contains(self, x, tol=TOL.membership):
        return contains(self, x, tol)

    def project(self, x, G=None):
        return project_scaled(self, x, G)

    def max_feasible_step(self, x, d):
        """Largest t >= 0 keeping ``x + t d`` in the band, starting from ``x`` in the band."""
        # q(x + t d) = q0 + g1 t + 1/2 g2 t^2
        q0 = self.q(x)
        g1 = float(self.grad_q(x) @ d)
        g2 = float(d @ (self.B @ d))
        roots = []
        for level in (self.m, self.M):
            roots.extend(_positive_roots(0.5 * g2, g1, q0 - level))
        return min(roots) if roots else np.inf


def _positive_roots(a, b, c):
    if abs(a) < 1e-300:
        return [-c / b] if b != 0 and -c / b > 0 else []
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    s = np.sqrt(disc)
    q = -0.5 * (b + np.copysign(s, b))
    out = [q / a]
    if q != 0:
        out.append(c / q)
    return [r for r in out if r > 0]


def contains(kset, x, tol=TOL.membership):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != kset.n:
        raise DimensionError(f"point of length {x.shape[0]} vs set dimension {kset.n}")
    if isinstance(kset, BoxSet):
        return bool(np.all(x >= kset.lower - tol) and np.all(x <= kset.upper + tol))
    qx = kset.q(x)
    return bool(kset.m - tol <= qx <= kset.M + tol)


def _metric(G, n):
    if G is None:
        return None
    M = G.entries if isinstance(G, SpdMatrix) else np.asarray(G, dtype=float)
    if M.shape != (n, n):
        raise DimensionError(f"metric of shape {M.shape} for set of dimension {n}")
    return M


def project_euclidean(kset, x):
    return project_scaled(kset, x, None).point


def project_scaled(kset, x, G=None, max_inner=MAX_INNER):
    """Project ``x`` onto ``kset`` in the ``G``-norm (``G=None`` means Euclidean)."""
    x = as_vector(x, kset.n)
    if isinstance(kset, QuadraticBandSet):
        return project_scaled_band(kset, x, G, max_inner=max_inner)
    if not isinstance(kset, BoxSet):
        raise TypeError(f"unsupported feasible set {type(kset).__name__}")
    if contains(kset, x, 0.0):
        return ProjectionResult(x.copy())
    M = _metric(G, kset.n)
    if M is None or np.count_nonzero(M - np.diag(np.diag(M))) == 0:
        return ProjectionResult(kset.clamp(x))
    return _project_box_metric(kset, x, M, max_inner)


def _box_residual(kset, y, g):
    return float(np.max(np.abs(y - kset.clamp(y - g)), initial=0.0))


def _project_box_metric(kset, z, G, max_inner):
    """Box QP ``min 1/2 y^T G y - y^T G z`` by primal-dual active sets.

    The active-set iteration is exact when it settles; if it cycles the
    accelerated projected-gradient loop takes over from the best iterate.
    """
    lo, hi = kset.lower, kset.upper
    c = G @ z
    y = kset.clamp(z)
    g = G @ y - c
    scale = max(1.0, float(np.abs(np.diag(G)).max()))
    fixed_lo = lo == hi
    seen = set()
    iters = 0
    for iters in range(1, min(60, max_inner) + 1):
        t = y - g / scale
        act_lo = (t <= lo) | fixed_lo
        act_hi = (t >= hi) & ~act_lo
        key = (act_lo.tobytes(), act_hi.tobytes())
        if key in seen:
            break
        seen.add(key)
        free = ~(act_lo | act_hi)
        y_new = np.where(act_lo, lo, np.where(act_hi, hi, 0.0))
        if free.any():
            rhs = c[free] - G[np.ix_(free, ~free)] @ y_new[~free]
            try:
                y_new[free] = sla.solve(G[np.ix_(free, free)], rhs, assume_a="pos", check_finite=False)
            except (np.linalg.LinAlgError, ValueError):
                break
        y = y_new
        g = G @ y - c
        if np.all(y >= lo) and np.all(y <= hi) and _box_residual(kset, y, g / scale) <= 1e-14:
            break
    y = kset.clamp(y)
    g = G @ y - c
    res = _box_residual(kset, y, g / scale)
    if res <= TOL.kkt * 1e-2:
        return ProjectionResult(y, iters, res)
    y, more, res = _apg_box(kset, G, c, y, max_inner, scale)
    if res > TOL.kkt:
        raise ProjectionError("box projection did not converge", res)
    return ProjectionResult(y, iters + more, res)


def _power_lmax(G, iters=200):
    v = np.ones(G.shape[0]) / np.sqrt(G.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= 1e-12 * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return lam


def _apg_box(kset, G, c, y0, max_inner, scale):
    """Accelerated projected gradient with adaptive restart."""
    L = 1.02 * _power_lmax(G)
    step = 1.0 / L
    y = y0.copy()
    w = y.copy()
    t = 1.0
    res = np.inf
    for it in range(1, max_inner + 1):
        y_new = kset.clamp(w - step * (G @ w - c))
        g = G @ y_new - c
        res = _box_residual(kset, y_new, g / scale)
        if res <= TOL.kkt * 1e-2:
            return y_new, it, res
        if float((w - y_new) @ (y_new - y)) > 0:
            t = 1.0
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        w = y_new + ((t - 1) / t_new) * (y_new - y)
        y, t = y_new, t_new
    return y, max_inner, res


# --- quadratic band -------------------------------------------------------


def _band_coordinates(kset, G):
    """Whitened eigen-coordinates of the band constraint under metric ``G``.

    Returns ``(lam, c, to_w, from_w)`` with ``w = to_w(y)`` such that
    ``1/2 ||y - z||_G^2 = 1/2 ||w - to_w(z)||^2`` and
    ``q(y) = 1/2 sum(lam * w**2) + c @ w + beta``.
    """
    if G is None:
        cached = kset._euclid_eig
        if cached is None:
            lam, Q = np.linalg.eigh(kset.B)
            cached = (np.maximum(lam, 0.0), Q)
            object.__setattr__(kset, "_euclid_eig", cached)
        lam, Q = cached
        return lam, Q.T @ kset.b, (lambda y: Q.T @ y), (lambda w: Q @ w)
    source = getattr(G, "inverse_of", None)
    if source is not None:
        # G = D^{-1} = R^{-T} R^{-1} with D = R R^T, so u = R^{-1} y and y = R u
        R = np.tril(source._chol[0]) if source._chol[1] else np.triu(source._chol[0]).T
        C = symmetrize(R.T @ kset.B @ R)
        lam, Q = np.linalg.eigh(C)
        c = Q.T @ (R.T @ kset.b)
        return (
            np.maximum(lam, 0.0),
            c,
            lambda y: Q.T @ sla.solve_triangular(R, y, lower=True, check_finite=False),
            lambda w: R @ (Q @ w),
        )
    M = G.entries if isinstance(G, SpdMatrix) else np.asarray(G, dtype=float)
    Lf = np.linalg.cholesky(M)
    # G = L L^T, u = L^T y
    Linv_B = sla.solve_triangular(Lf, kset.B, lower=True, check_finite=False)
    C = symmetrize(sla.solve_triangular(Lf, Linv_B.T, lower=True, check_finite=False))
    lam, Q = np.linalg.eigh(C)
    c = Q.T @ sla.solve_triangular(Lf, kset.b, lower=True, check_finite=False)
    return (
        np.maximum(lam, 0.0),
        c,
        lambda y: Q.T @ (Lf.T @ y),
        lambda w: sla.solve_triangular(Lf.T, Q @ w, lower=False, check_finite=False),
    )


def _h(lam, c, beta, w):
    return 0.5 * float(lam @ (w * w)) + float(c @ w) + beta


def _solve_multiplier(phi, target, lo, hi, increasing, max_iter):
    """Bisection on a monotone scalar function; returns (nu, iterations)."""
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        val = phi(mid)
        if (val > target) == increasing:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi), it


def project_scaled_band(kset, x, G=None, max_inner=MAX_INNER):
    """Project onto the quadratic band in the ``G``-norm.

    At most one face is active. Each face reduces to a monotone scalar
    equation in its multiplier, solved by bracketing plus bisection in the
    whitened eigenbasis of ``B``.
    """
    x = np.asarray(x, dtype=float)
    qx = kset.q(x)
    if kset.m <= qx <= kset.M:
        return ProjectionResult(x.copy())
    lam, c, to_w, from_w = _band_coordinates(kset, G)
    a = to_w(x)
    beta = kset.beta
    if qx > kset.M:
        target, sign = kset.M, 1.0

        def w_of(nu):
            return (a - nu * c) / (1.0 + nu * lam)

        hi = 1.0
        brackets = 0
        while _h(lam, c, beta, w_of(hi)) > target:
            hi *= 2.0
            brackets += 1
            if brackets > 200:
                raise ProjectionError("cannot bracket upper-face multiplier", qx - kset.M)
        nu, it = _solve_multiplier(
            lambda v: _h(lam, c, beta, w_of(v)), target, 0.0, hi, False, max_inner
        )
        w = w_of(nu)
    else:
        target, sign = kset.m, -1.0
        lmax = float(lam.max())
        top = np.isclose(lam, lmax, rtol=1e-12, atol=0.0) if lmax > 0 else np.zeros_like(lam, bool)

        def w_of(nu):
            return (a + nu * c) / (1.0 - nu * lam)

        it = 0
        if lmax <= 0:
            hi = 1.0
            while _h(lam, c, beta, w_of(hi)) < target:
                hi *= 2.0
                it += 1
                if it > 200:
                    raise ProjectionError("cannot bracket lower-face multiplier", kset.m - qx)
            nu, more = _solve_multiplier(
                lambda v: _h(lam, c, beta, w_of(v)), target, 0.0, hi, True, max_inner
            )
            w = w_of(nu)
            it += more
        else:
            nu_cap = 1.0 / lmax
            hard = np.all(np.abs(a[top] + nu_cap * c[top]) <= 1e-14 * (1 + np.abs(a).max()))
            probe = nu_cap * (1 - 1e-12)
            if not hard and _h(lam, c, beta, w_of(probe)) >= target:
                nu, it = _solve_multiplier(
                    lambda v: _h(lam, c, beta, w_of(v)), target, 0.0, probe, True, max_inner
                )
                w = w_of(nu)
            else:
                # hard case: multiplier pinned at 1/lmax, move along the top eigenspace
                nu = nu_cap
                w = np.zeros_like(a)
                rest = ~top
                w[rest] = (a[rest] + nu * c[rest]) / (1.0 - nu * lam[rest])
                e = np.zeros_like(a)
                e[int(np.flatnonzero(top)[0])] = 1.0
                base = _h(lam, c, beta, w)
                # h(w + t e) = base + (c_e) t + 1/2 lmax t^2 = target
                ce = float(c @ e)
                roots = np.roots([0.5 * lmax, ce, base - target])
                roots = roots[np.isreal(roots)].real
                if roots.size == 0:
                    raise ProjectionError("hard case without real root", kset.m - qx)
                t = roots[np.argmin(np.abs(roots))]
                w = w + t * e
    y = from_w(w)
    res = _band_kkt_residual(kset, x, y, G, sign * nu, target)
    if res > TOL.kkt:
        raise ProjectionError("band projection KKT residual too large", res)
    return ProjectionResult(y, int(it), res, float(sign * nu))


def _band_kkt_residual(kset, x, y, G, nu, target):
    M = np.eye(kset.n) if G is None else (G.entries if isinstance(G, SpdMatrix) else G)
    r = M @ (y - x)
    gq = kset.grad_q(y)
    scale = 1.0 + max(np.abs(r).max(), abs(nu) * np.abs(gq).max())
    stat = np.abs(r + nu * gq).max() / scale
    feas = abs(kset.q(y) - target) / (1.0 + abs(target))
    return float(max(stat, feas))
