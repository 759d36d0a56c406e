"""Non-monotone backtracking rules.

Three references are supported:

* ``SgmRef``: the anchor ``T`` updated as ``T' = eta T + (1 - eta) f_new``;
  acceptance ``f(x + l d) <= T + delta1 l g.d - delta2 l^2 |d|^2`` with
  initial trial ``s = -g.d / |d|^2``.
* ``ZhRef``: Zhang-Hager averages ``Q' = eta Q + 1``,
  ``C' = (eta Q C + f_new) / Q'``; acceptance ``f <= C + delta l g.d``.
* ``GllRef``: max over the last ``M + 1`` values.

Every accepted step is exactly ``s * beta**j``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BacktrackExhaustedError, DomainError, NonDescentError
from .linalg import TOL


@dataclass(frozen=True)
class SgmParams:
    delta1: float = 0.001
    delta2: float = 0.0001
    beta: float = 0.5
    eta_max: float = 0.0
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0 < self.delta1 < self.beta < 1:
            raise ValueError(
                f"need 0 < delta1 < beta < 1, got delta1={self.delta1}, beta={self.beta}"
            )
        if self.delta2 < 0:
            raise ValueError(f"delta2 must be >= 0, got {self.delta2}")
        if not 0 <= self.eta_max < 1:
            raise ValueError(f"need 0 <= eta_max < 1, got {self.eta_max}")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be nonnegative")


@dataclass(frozen=True)
class SgmRef:
    T: float

    @property
    def value(self):
        return self.T


@dataclass(frozen=True)
class ZhRef:
    C: float
    Q: float = 1.0

    @property
    def value(self):
        return self.C


@dataclass(frozen=True)
class GllRef:
    window: tuple
    M: int = 10

    @property
    def value(self):
        return max(self.window)


@dataclass(frozen=True)
class StepResult:
    lam: float
    j: int
    f_new: float
    lhs: float
    rhs: float
    s: float
    f_evals: int

    @property
    def accepted_condition_lhs_rhs(self):
        return (self.lhs, self.rhs)


def _backtrack(f, x, d, s, beta, ref_value, slope, quad, max_backtracks, kset):
    """Smallest j >= 0 with ``f(x + s beta^j d) <= ref + slope*lam - quad*lam^2``.

    Trial points outside ``kset`` (when given) or where ``f`` is undefined
    count as failures.
    """
    evals = 0
    for j in range(max_backtracks + 1):
        lam = s * beta**j
        trial = x + lam * d
        if kset is not None and not kset.contains(trial, getattr(kset, "trial_tol", TOL.membership)):
            continue
        try:
            f_trial = f.value(trial)
        except DomainError:
            evals += 1
            continue
        evals += 1
        rhs = ref_value + slope * lam - quad * lam * lam
        if f_trial <= rhs:
            return StepResult(lam, j, f_trial, f_trial, rhs, s, evals)
    raise BacktrackExhaustedError(
        f"no acceptable step after {max_backtracks} backtracks (s={s:.3e}, ref={ref_value:.6e})"
    )


def _check_descent(grad_dot_d, d):
    if not grad_dot_d < 0:
        raise NonDescentError(f"direction is not a descent direction (g.d = {grad_dot_d:.3e})")
    dd = float(d @ d)
    if dd <= 0:
        raise NonDescentError("zero search direction")
    return dd


def sgm_search(f, x, d, grad_dot_d, ref, params, kset=None):
    dd = _check_descent(grad_dot_d, d)
    s = -grad_dot_d / dd
    return _backtrack(
        f, x, d, s, params.beta, ref.T,
        params.delta1 * grad_dot_d, params.delta2 * dd, params.max_backtracks, kset,
    )


def sgm_ref_update(ref, f_new, eta_next, eta_max=None):
    if eta_next < 0 or (eta_max is not None and eta_next > eta_max) or eta_next >= 1:
        raise ValueError(f"eta {eta_next} outside [0, eta_max]")
    return SgmRef(eta_next * ref.T + (1.0 - eta_next) * f_new)


def zh_search(f, x, d, grad_dot_d, ref, delta, beta=0.5, s=1.0, max_backtracks=60, kset=None):
    _check_descent(grad_dot_d, d)
    return _backtrack(f, x, d, s, beta, ref.C, delta * grad_dot_d, 0.0, max_backtracks, kset)


def zh_ref_update(ref, f_new, eta):
    if not 0 <= eta < 1:
        raise ValueError(f"eta {eta} outside [0, 1)")
    Q = eta * ref.Q + 1.0
    return ZhRef((eta * ref.Q * ref.C + f_new) / Q, Q)


def gll_search(f, x, d, grad_dot_d, window, delta, beta=0.5, s=1.0, max_backtracks=60, kset=None):
    _check_descent(grad_dot_d, d)
    return _backtrack(f, x, d, s, beta, window.value, delta * grad_dot_d, 0.0, max_backtracks, kset)


def gll_ref_update(ref, f_new):
    """Append ``f_new``, keeping at most ``M + 1`` values (``m_k <= min(m_{k-1} + 1, M)``)."""
    window = (ref.window + (float(f_new),))[-(ref.M + 1):]
    return GllRef(window, ref.M)


def initial_ref(kind, f0, M=10):
    if kind == "sgm":
        return SgmRef(float(f0))
    if kind == "zh":
        return ZhRef(float(f0), 1.0)
    if kind == "gll":
        return GllRef((float(f0),), M)
    raise ValueError(f"unknown reference kind {kind!r}")


def lambda_floor(params, L, mu, alpha_max):
    """Step-size lower bound ``(1 - delta1) / ((1 + delta2 L / 2) mu alpha_max)``."""
    return (1.0 - params.delta1) / ((1.0 + params.delta2 * L / 2.0) * mu * alpha_max)


def sufficient_decrease_constant(delta1, delta2, beta, L):
    """``zeta = min(delta1 + delta2, beta delta1 (1-delta1)/(L+delta2) + beta^2 delta2 (1-delta1)^2/(L+delta2)^2)``."""
    a = delta1 + delta2
    b = beta * delta1 * (1 - delta1) / (L + delta2) + beta**2 * delta2 * (1 - delta1) ** 2 / (L + delta2) ** 2
    return float(min(a, b))


def step_is_exact(step, beta):
    return step.lam == step.s * beta**step.j and np.isfinite(step.lam)
