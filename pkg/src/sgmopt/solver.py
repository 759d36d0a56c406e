"""Outer iteration drivers: SGM, and the YWH / ZH baselines.

One iteration, for all three methods::

    D      = scaling matrix at x_k           (identity for ZH)
    y_k    = P_{K, D^{-1}}(x_k - alpha_k D grad f(x_k))
    d_k    = y_k - x_k
    x_{k+1} = x_k + lambda_k d_k             (non-monotone backtracking)

SGM starts backtracking from ``s_k = -g.d / |d|^2`` against the anchor ``T``
with the extra ``delta2`` term; YWH and ZH start from a fixed ``s`` against
the Zhang-Hager average.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import linesearch as ls
from .errors import BacktrackExhaustedError, NonDescentError, NumericalError, ProjectionError, SgmError
from .linalg import SpdMatrix, dnorm_sq, spectral_clip, tightest_mu
from .projection import project_scaled

log = logging.getLogger(__name__)

# below this relative size a failed line search is attributed to round-off
FLOOR_DNORM = 1e-6

STATUSES = ("converged_dnorm", "converged_grad", "max_iters", "linesearch_failure", "numerical_error")


@dataclass(frozen=True)
class Schedules:
    alpha: Callable[[int], float]
    eta: Callable[[int], float]
    mu: Callable[[int], float]
    alpha_min: float
    alpha_max: float
    eta_max: float
    mu_max: float
    lambda0: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha_min <= self.alpha_max < np.inf:
            raise ValueError("need 0 < alpha_min <= alpha_max < inf")
        if not 0 <= self.eta_max < 1:
            raise ValueError("need 0 <= eta_max < 1")
        if self.mu_max < 1:
            raise ValueError("need mu >= 1")

    def at(self, k):
        """Return ``(alpha_k, eta_k, mu_k)``, each checked against its band."""
        a, e, m = float(self.alpha(k)), float(self.eta(k)), float(self.mu(k))
        if not self.alpha_min <= a <= self.alpha_max:
            raise ValueError(f"alpha_{k}={a} outside [{self.alpha_min}, {self.alpha_max}]")
        if not 0 <= e <= self.eta_max:
            raise ValueError(f"eta_{k}={e} outside [0, {self.eta_max}]")
        if not 1 <= m <= self.mu_max:
            raise ValueError(f"mu_{k}={m} outside [1, {self.mu_max}]")
        return a, e, m


def standard_schedules(n, mu=1.25):
    """Constant schedules ``alpha = eta = 1 - (n+1)^-1/2``, ``mu_k = 1 + (n+1)^-2``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    alpha = 1.0 - 1.0 / np.sqrt(n + 1.0)
    eta = 1.0 - 1.0 / np.sqrt(n + 1.0)
    mu_k = 1.0 + 1.0 / (n + 1.0) ** 2
    return Schedules(
        alpha=lambda k: alpha, eta=lambda k: eta, mu=lambda k: mu_k,
        alpha_min=alpha, alpha_max=alpha, eta_max=eta, mu_max=max(mu, mu_k), lambda0=1.0,
    )


SCALING_KINDS = ("identity", "hessian_literal", "hessian_clipped", "diagonal_hessian", "constant")


@dataclass(frozen=True, eq=False)
class ScalingRule:
    """How ``D_k`` is chosen.

    ``lo``/``hi`` default to the band ``[1/mu_k, mu_k]`` for the clipped and
    diagonal kinds. Literal kinds carry the tightest certificate of the
    matrix actually used.

    ``as_metric=True`` treats the named matrix ``M`` as the projection
    metric, so ``D_k = M^{-1}`` and the step is ``x - alpha M^{-1} grad f``
    (Newton-like for ``M`` = Hessian). ``as_metric=False`` uses ``D_k = M``.
    """

    kind: str = "identity"
    lo: Optional[float] = None
    hi: Optional[float] = None
    matrix: Optional[np.ndarray] = None
    as_metric: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in SCALING_KINDS:
            raise ValueError(f"unknown scaling kind {self.kind!r}")
        if self.kind == "constant" and self.matrix is None:
            raise ValueError("constant scaling needs a matrix")

    def matrix_at(self, obj, x, mu_k):
        M = self._named_matrix(obj, x, mu_k)
        return M.inverse() if self.as_metric and self.kind != "identity" else M

    def _named_matrix(self, obj, x, mu_k):
        n = x.shape[0]
        if self.kind == "identity":
            if "I" not in self._cache:
                self._cache["I"] = SpdMatrix.identity(n)
            return self._cache["I"]
        if self.kind == "constant":
            if "C" not in self._cache:
                self._cache["C"] = SpdMatrix(self.matrix, mu=None)
            return self._cache["C"]
        lo = 1.0 / mu_k if self.lo is None else self.lo
        hi = mu_k if self.hi is None else self.hi
        H = obj.hessian(x)
        if self.kind == "hessian_clipped":
            return spectral_clip(H, lo, hi)
        if self.kind == "diagonal_hessian":
            dg = np.clip(np.diag(H), lo, hi)
            return SpdMatrix(np.diag(dg), mu=max(hi, 1.0 / lo))
        try:
            return SpdMatrix(H, mu=None)
        except NumericalError:
            top = max(float(np.abs(np.linalg.eigvalsh(H)).max()), 1e-6)
            log.warning("Hessian not positive definite at this iterate; clipping into [1e-6, %g]", top)
            return spectral_clip(H, 1e-6, top)


@dataclass(frozen=True)
class SolverConfig:
    schedules: Schedules
    linesearch: ls.SgmParams = field(default_factory=ls.SgmParams)
    scaling: ScalingRule = field(default_factory=ScalingRule)
    stop_dnorm: Optional[float] = None
    stop_grad: float = 1e-12
    max_iters: int = 100
    reference_value: Optional[float] = None
    reference_rule: Optional[str] = None
    gll_memory: int = 10
    feasible_trials: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.stop_grad <= 0 or (self.stop_dnorm is not None and self.stop_dnorm <= 0):
            raise ValueError("stopping tolerances must be positive")

    def dnorm_tol(self, x):
        return 1e-10 * (1.0 + float(np.linalg.norm(x))) if self.stop_dnorm is None else self.stop_dnorm


@dataclass(frozen=True)
class IterationRecord:
    k: int
    f_val: float
    grad_norm: float
    d_norm: float
    lam: float
    j: int
    T: float
    s: float
    grad_dot_d: float
    f_evals: int
    wall_nanos: int
    # extra columns consumed by diagnostics (JSON only)
    alpha: float = 0.0
    eta_next: float = 0.0
    mu_eff: float = 1.0
    d_dinv_sq: float = 0.0
    step_norm: float = 0.0
    T_next: float = float("nan")
    f_next: float = float("nan")
    x_norm: float = 0.0

    @property
    def terminal(self):
        return self.lam == 0.0


CSV_COLUMNS = ("k", "f", "grad_norm", "d_norm", "lambda", "j", "T", "s", "grad_dot_d", "f_evals", "wall_nanos")


@dataclass(frozen=True)
class RunReport:
    method: str
    trace: tuple
    status: str
    final_x: np.ndarray
    total_f_evals: int
    total_grad_evals: int
    config: SolverConfig
    message: str = ""

    @property
    def iterations(self):
        return len(self.trace) - 1

    @property
    def final(self):
        return self.trace[-1]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.trace])


def _feasible_start(kset, x0):
    x0 = np.asarray(x0, dtype=float).copy()
    if not kset.contains(x0):
        log.warning("x0 is outside the feasible set; projecting it")
        x0 = project_scaled(kset, x0, None).point
    return x0


def _direction(obj, kset, x, g, alpha, D, scaled):
    if scaled:
        z = x - alpha * (D @ g)
        y = project_scaled(kset, z, D.inverse()).point
    else:
        y = project_scaled(kset, x - alpha * g, None).point
    return y - x


def _iterate(method, obj, kset, x0, cfg):
    rule = cfg.reference_rule or ("sgm" if method == "SGM" else "zh")
    scaled = method != "ZH"
    scaling = cfg.scaling if scaled else ScalingRule("identity")
    params = cfg.linesearch
    sched = cfg.schedules
    fixed_s = sched.lambda0
    trial_set = kset if cfg.feasible_trials else None

    t0 = time.monotonic_ns()
    x = _feasible_start(kset, x0)
    rep = obj.evaluate(x)
    fx, g = rep.value, rep.gradient
    n_f, n_g = 1, 1
    ref = ls.initial_ref(rule, fx, cfg.gll_memory)
    trace = []
    status, message = "max_iters", ""

    for k in range(cfg.max_iters + 1):
        gnorm = float(np.linalg.norm(g))
        try:
            alpha, _, mu_k = sched.at(k)
            eta_next = sched.at(k + 1)[1]
            D = scaling.matrix_at(obj, x, mu_k)
            d = _direction(obj, kset, x, g, alpha, D, scaled)
        except (ProjectionError, NumericalError, ValueError) as exc:
            status, message = "numerical_error", str(exc)
            trace.append(IterationRecord(k, fx, gnorm, 0.0, 0.0, 0, ref.value, 0.0, 0.0, 0,
                                         time.monotonic_ns() - t0))
            break
        dnorm = float(np.linalg.norm(d))
        gd = float(g @ d)
        d_dinv = dnorm_sq(d, D.inverse()) if scaled and scaling.kind != "identity" else float(d @ d)
        base = dict(alpha=alpha, eta_next=eta_next, mu_eff=D.mu, d_dinv_sq=d_dinv,
                    x_norm=float(np.linalg.norm(x)))

        stop = None
        if dnorm <= cfg.dnorm_tol(x):
            stop = "converged_dnorm"
        elif gnorm <= cfg.stop_grad:
            stop = "converged_grad"
        elif k == cfg.max_iters:
            stop = "max_iters"
        if stop is not None:
            status = stop
            trace.append(IterationRecord(k, fx, gnorm, dnorm, 0.0, 0, ref.value, 0.0, gd, 0,
                                         time.monotonic_ns() - t0, **base))
            break

        try:
            if rule == "sgm":
                step = ls.sgm_search(obj, x, d, gd, ref, params, trial_set)
            elif rule == "zh":
                step = ls.zh_search(obj, x, d, gd, ref, params.delta1, params.beta, fixed_s,
                                    params.max_backtracks, trial_set)
            else:
                step = ls.gll_search(obj, x, d, gd, ref, params.delta1, params.beta, fixed_s,
                                     params.max_backtracks, trial_set)
        except (NonDescentError, BacktrackExhaustedError) as exc:
            if dnorm <= FLOOR_DNORM * (1.0 + float(np.linalg.norm(x))):
                # d is at the size of the projection round-off: x is stationary to working accuracy
                status, message = "converged_dnorm", f"stopped at the accuracy floor: {exc}"
            else:
                status, message = "linesearch_failure", str(exc)
            trace.append(IterationRecord(k, fx, gnorm, dnorm, 0.0, 0, ref.value, 0.0, gd, 0,
                                         time.monotonic_ns() - t0, **base))
            break
        n_f += step.f_evals

        x_new = x + step.lam * d
        if rule == "sgm":
            new_ref = ls.sgm_ref_update(ref, step.f_new, eta_next)
        elif rule == "zh":
            new_ref = ls.zh_ref_update(ref, step.f_new, eta_next)
        else:
            new_ref = ls.gll_ref_update(ref, step.f_new)
        trace.append(IterationRecord(
            k, fx, gnorm, dnorm, step.lam, step.j, ref.value, step.s, gd, step.f_evals,
            time.monotonic_ns() - t0, step_norm=float(np.linalg.norm(x_new - x)),
            T_next=new_ref.value, f_next=step.f_new, **base,
        ))
        x, fx, ref = x_new, step.f_new, new_ref
        g = obj.gradient(x)
        n_g += 1
        if not (np.isfinite(fx) and np.all(np.isfinite(g))):
            status, message = "numerical_error", "non-finite objective or gradient"
            trace.append(IterationRecord(k + 1, fx, float("nan"), 0.0, 0.0, 0, ref.value, 0.0, 0.0, 0,
                                         time.monotonic_ns() - t0))
            break

    return RunReport(method, tuple(trace), status, x, n_f, n_g, cfg, message)


def sgm_solve(obj, kset, x0, cfg):
    """Scaled gradient method with the modified non-monotone line search."""
    return _iterate("SGM", obj, kset, x0, cfg)


def ywh_solve(obj, kset, x0, cfg):
    """Scaled projection, fixed trial step ``lambda0``, Zhang-Hager reference, no ``delta2`` term."""
    p = cfg.linesearch
    cfg = replace(cfg, linesearch=replace(p, delta2=0.0))
    return _iterate("YWH", obj, kset, x0, cfg)


def zh_solve(obj, kset, x0, cfg):
    """Euclidean projection, identity scaling, Zhang-Hager reference."""
    p = cfg.linesearch
    cfg = replace(cfg, linesearch=replace(p, delta2=0.0))
    return _iterate("ZH", obj, kset, x0, cfg)


SOLVERS = {"SGM": sgm_solve, "YWH": ywh_solve, "ZH": zh_solve}


def stationarity_gap(obj, kset, x, alpha, D=None):
    """``|| P_{K,D^{-1}}(x - alpha D grad f(x)) - x ||``; zero exactly at VIP solutions."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    x = np.asarray(x, dtype=float)
    g = obj.gradient(x)
    if D is None:
        y = project_scaled(kset, x - alpha * g, None).point
    else:
        y = project_scaled(kset, x - alpha * (D @ g), D.inverse()).point
    return float(np.linalg.norm(y - x))


def default_config(problem, max_iters=100, scaling=None, clip=False, **kw):
    """Settings used in the experiments: standard schedules, ``beta=0.5``, ``delta1=1e-3``, ``delta2=1e-4``."""
    sched = standard_schedules(problem.n)
    params = ls.SgmParams(0.001, 0.0001, 0.5, eta_max=sched.eta_max)
    kind = scaling or problem.scaling
    if kind in ("hessian", "hessian_literal"):
        rule = ScalingRule("hessian_clipped") if clip else ScalingRule("hessian_literal")
    elif kind in ("2V", "constant"):
        rule = ScalingRule("constant", matrix=problem.objective.hessian(problem.x0))
    elif kind in ("hessian-clipped", "hessian_clipped"):
        rule = ScalingRule("hessian_clipped")
    else:
        rule = ScalingRule(kind)
    return SolverConfig(sched, params, rule, max_iters=max_iters, reference_value=problem.f_star, **kw)
