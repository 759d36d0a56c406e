"""Objective functions with closed-form derivatives and finite-difference checks."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .linalg import as_vector, is_spd, symmetrize

DENOM_FLOOR = 1e-12


@dataclass(frozen=True)
class ObjectiveReport:
    value: float
    gradient: np.ndarray
    hessian: Optional[np.ndarray] = None


class Objective:
    """Base class: subclasses implement ``evaluate``."""

    n: int

    def evaluate(self, x, hessian=False) -> ObjectiveReport:
        raise NotImplementedError

    def value(self, x):
        return self.evaluate(x).value

    def gradient(self, x):
        return self.evaluate(x).gradient

    def hessian(self, x):
        return self.evaluate(x, hessian=True).hessian


@dataclass(frozen=True, eq=False)
class FractionalQuadratic(Objective):
    """Ratio ``p(x)/q(x)`` of two quadratics, each written as ``1/2 x^T A x + a^T x + alpha``.

    ``hessian_form`` selects how the second derivative is assembled:
    ``"full"`` expands the quotient rule into four terms, ``"printed"`` uses
    the compact form built from ``g = grad p - f grad q``. Both are exact;
    keeping the two lets the finite-difference check compare them.
    """

    W_num: np.ndarray
    a_num: np.ndarray
    alpha_num: float
    B_den: np.ndarray
    b_den: np.ndarray
    beta_den: float
    hessian_form: str = "full"

    def __post_init__(self):
        a = as_vector(self.a_num)
        n = a.shape[0]
        object.__setattr__(self, "a_num", a)
        object.__setattr__(self, "b_den", as_vector(self.b_den, n))
        object.__setattr__(self, "W_num", symmetrize(self.W_num))
        B = np.zeros((n, n)) if self.B_den is None else symmetrize(self.B_den)
        object.__setattr__(self, "B_den", B)
        if self.hessian_form not in ("full", "printed"):
            raise ValueError(f"unknown hessian_form {self.hessian_form!r}")

    @classmethod
    def from_linear_denominator(cls, W, w1, v1, w2, v2, **kw):
        """``(x^T W x + w1^T x + v1) / (w2^T x + v2)``."""
        W = np.asarray(W, dtype=float)
        return cls(2.0 * W, w1, v1, np.zeros_like(W), w2, v2, **kw)

    @property
    def n(self):
        return self.a_num.shape[0]

    def numerator(self, x):
        return 0.5 * float(x @ (self.W_num @ x)) + float(self.a_num @ x) + self.alpha_num

    def denominator(self, x):
        return 0.5 * float(x @ (self.B_den @ x)) + float(self.b_den @ x) + self.beta_den

    def evaluate(self, x, hessian=False):
        return eval_fractional(self, x, hessian)

    def certify_denominator(self, kset, sign=1.0):
        """Return the smallest ``sign * q`` over box vertices (n <= 20) or a conservative bound."""
        from .projection import BoxSet

        if isinstance(kset, BoxSet) and kset.n <= 20:
            vals = [
                self.denominator(np.where(np.array(bits), kset.upper, kset.lower))
                for bits in itertools.product((False, True), repeat=kset.n)
            ]
            if not np.allclose(self.B_den, 0):
                # convex q may dip inside the box; vertices only bound the affine case
                vals.append(self.denominator(kset.clamp(-np.linalg.pinv(self.B_den) @ self.b_den)))
            return min(sign * v for v in vals)
        R = kset.bounding_radius()
        normB = np.linalg.norm(self.B_den, 2)
        return sign * self.beta_den - np.linalg.norm(self.b_den) * R - 0.5 * normB * R * R


def eval_fractional(f, x, hessian=False):
    x = np.asarray(x, dtype=float)
    A, a, B, b = f.W_num, f.a_num, f.B_den, f.b_den
    Ax, Bx = A @ x, B @ x
    p = 0.5 * float(x @ Ax) + float(a @ x) + f.alpha_num
    q = 0.5 * float(x @ Bx) + float(b @ x) + f.beta_den
    if abs(q) < DENOM_FLOOR:
        raise DomainError(f"denominator {q:.3e} too close to zero")
    dp, dq = Ax + a, Bx + b
    val = p / q
    g = dp - val * dq
    grad = g / q
    H = None
    if hessian:
        if f.hessian_form == "printed":
            H = (q * A - p * B) / q**2 - (np.outer(g, dq) + np.outer(dq, g)) / q**2
        else:
            H = (
                A / q
                - (np.outer(dp, dq) + np.outer(dq, dp)) / q**2
                - p * B / q**2
                + 2.0 * p * np.outer(dq, dq) / q**3
            )
        H = symmetrize(H)
    return ObjectiveReport(val, grad, H)


@dataclass(frozen=True, eq=False)
class BoxQuadratic(Objective):
    """``x^T V x - p^T V p + p^T W (x - p)`` with ``V``, ``W`` SPD."""

    V: np.ndarray
    W: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        p = as_vector(self.p)
        V, W = symmetrize(self.V), symmetrize(self.W)
        for name, M in (("V", V), ("W", W)):
            if M.shape != (p.shape[0], p.shape[0]) or not is_spd(M):
                raise ValueError(f"{name} must be a symmetric positive definite {p.shape[0]}x{p.shape[0]} matrix")
        ev = np.linalg.eigvalsh(V)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "gamma", float(ev[0]))
        object.__setattr__(self, "lambda_max", float(ev[-1]))
        object.__setattr__(self, "_Wp", W @ p)
        object.__setattr__(self, "_const", -float(p @ (V @ p)) - float(p @ self._Wp))

    @property
    def n(self):
        return self.p.shape[0]

    @property
    def lipschitz(self):
        return 2.0 * self.lambda_max

    def evaluate(self, x, hessian=False):
        return eval_box_quadratic(self, x, hessian)


def eval_box_quadratic(f, x, hessian=False):
    x = np.asarray(x, dtype=float)
    Vx = f.V @ x
    val = float(x @ Vx) + float(f._Wp @ x) + f._const
    grad = 2.0 * Vx + f._Wp
    return ObjectiveReport(val, grad, 2.0 * f.V if hessian else None)


@dataclass(frozen=True, eq=False)
class CallbackObjective(Objective):
    """User-supplied ``fun``, ``grad`` and optional ``hess`` callables."""

    fun: Callable
    grad: Callable
    n: int
    hess: Optional[Callable] = None

    def evaluate(self, x, hessian=False):
        H = None
        if hessian:
            if self.hess is None:
                raise NotImplementedError("no Hessian callback supplied")
            H = symmetrize(np.atleast_2d(self.hess(x)))
        return ObjectiveReport(float(self.fun(x)), np.atleast_1d(np.asarray(self.grad(x), float)), H)


def fd_gradient(f, x, h):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f.value(x + e) - f.value(x - e)) / (2 * h)
    return g


def fd_hessian(f, x, h):
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        H[:, i] = (f.gradient(x + e) - f.gradient(x - e)) / (2 * h)
    return symmetrize(H)


def _rel_discrepancy(analytic, approx):
    scale = max(1.0, float(np.abs(analytic).max()))
    return float(np.abs(analytic - approx).max()) / scale


def check_gradient(f, x, h=None):
    """Max relative discrepancy between the analytic gradient and central differences."""
    x = np.asarray(x, dtype=float)
    h = 1e-6 * (1 + np.linalg.norm(x)) if h is None else h
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    return _rel_discrepancy(f.gradient(x), fd_gradient(f, x, h))


def check_hessian(f, x, h=None):
    x = np.asarray(x, dtype=float)
    h = 1e-6 * (1 + np.linalg.norm(x)) if h is None else h
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    return _rel_discrepancy(f.hessian(x), fd_hessian(f, x, h))


def lipschitz_estimate(f, kset, samples=1000, seed=0):
    """Estimate ``sup ||hess f||_2`` over the set.

    Exact for :class:`BoxQuadratic`; otherwise the max over random feasible
    points (plus box vertices for small boxes), which can only under-estimate.
    """
    if isinstance(f, BoxQuadratic):
        return f.lipschitz
    from .projection import BoxSet, project_euclidean

    rng = np.random.default_rng(seed)
    if isinstance(kset, BoxSet):
        pts = list(kset.sample(rng, samples))
        if kset.n <= 10:
            pts += [np.where(np.array(bits), kset.upper, kset.lower)
                    for bits in itertools.product((False, True), repeat=kset.n)]
    else:
        R = max(1.0, kset.bounding_radius()) if hasattr(kset, "bounding_radius") else 1.0
        pts = [project_euclidean(kset, rng.normal(scale=R, size=kset.n)) for _ in range(samples)]
    best = 0.0
    for x in pts:
        H = f.hessian(x)
        best = max(best, float(np.abs(np.linalg.eigvalsh(H)).max()))
    return best
