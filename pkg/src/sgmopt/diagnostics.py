"""Post-run checks of the convergence theory against a solver trace.

Every check is a pure function of a :class:`~sgmopt.solver.RunReport` (plus a
few constants) and returns a list of :class:`Violation` records; an empty
list means the inequality held at every iteration. Constants that the theory
only asserts to exist (``c``, ``kappa``) are measured from the trace.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientDataError
from .linesearch import lambda_floor, sufficient_decrease_constant

SLACK = 1e-9
STEP_SLACK = 1e-12
# d = y - x carries an absolute error of a few ulps of |x|
ROUNDING = 8.0 * np.finfo(float).eps


@dataclass(frozen=True)
class Violation:
    proposition: str
    iteration: int
    lhs: float
    rhs: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ConstantsEstimate:
    """Constants entering the bounds, measured or derived from one run.

    ``lambda_min_bound`` is the step floor actually asserted; with
    ``floor_form="printed"`` it is ``(1-d1)/((1 + d2 L/2) mu alpha_max)``,
    with ``"derived"`` it is what the backtracking argument gives:
    ``min(1/(mu alpha_max), beta (1-d1)/((L/2 + d2) mu alpha_max))``.
    """

    c_hat: float
    kappa_hat: float
    zeta_hat: float
    lambda_min_bound: float
    mu: float
    L: float
    alpha_max: float
    eta_max: float
    delta1: float
    delta2: float
    beta: float
    floor_form: str = "printed"

    def to_dict(self):
        return asdict(self)


def _steps(report):
    """Records that carry an accepted step (everything but the terminal one)."""
    return [r for r in report.trace if r.lam > 0]


def measured_c(report):
    """``min_k (-g.d)/|g|^2`` over accepted steps; ``nan`` if no step was taken."""
    vals = [-r.grad_dot_d / r.grad_norm**2 for r in _steps(report) if r.grad_norm > 0]
    return float(min(vals)) if vals else float("nan")


def measured_mu(report):
    """Largest eigenvalue-band certificate of the scaling matrices used."""
    return float(max(r.mu_eff for r in report.trace))


def derived_lambda_floor(delta1, beta, L, mu, alpha_max, delta2):
    full = 1.0 / (mu * alpha_max)
    backtracked = beta * (1.0 - delta1) / ((L / 2.0 + delta2) * mu * alpha_max)
    return float(min(full, backtracked))


def estimate_constants(report, L, mu=None, floor_form="printed"):
    """Measure ``c``, derive ``zeta``, ``kappa`` and the step floor for ``report``."""
    if floor_form not in ("derived", "printed"):
        raise ValueError(f"unknown floor_form {floor_form!r}")
    cfg = report.config
    p, sched = cfg.linesearch, cfg.schedules
    mu = measured_mu(report) if mu is None else float(mu)
    amax = sched.alpha_max
    zeta = sufficient_decrease_constant(p.delta1, p.delta2, p.beta, L)
    c = measured_c(report)
    kappa = c * c * zeta / (mu**6 * amax**2) if np.isfinite(c) else float("nan")
    if floor_form == "printed":
        floor = lambda_floor(p, L, mu, amax)
    else:
        floor = derived_lambda_floor(p.delta1, p.beta, L, mu, amax, p.delta2)
    return ConstantsEstimate(
        c_hat=c, kappa_hat=kappa, zeta_hat=zeta, lambda_min_bound=floor, mu=mu, L=float(L),
        alpha_max=amax, eta_max=sched.eta_max, delta1=p.delta1, delta2=p.delta2, beta=p.beta,
        floor_form=floor_form,
    )


def _flag(out, name, k, lhs, rhs, slack):
    if not lhs <= rhs + slack:
        out.append(Violation(name, int(k), float(lhs), float(rhs)))


def check_propositions(report, constants, sgm_reference=None):
    """Per-iteration inequalities of the descent, reference and step-size propositions.

    ``sgm_reference`` (default: method is SGM) enables the checks that only
    hold for the ``T`` anchor (f_{k+1} <= T_k, T non-increasing).
    """
    if not report.trace:
        raise InsufficientDataError("empty trace")
    sgm = report.method == "SGM" if sgm_reference is None else sgm_reference
    mu, amax = constants.mu, constants.alpha_max
    f0 = report.trace[0].f_val
    c = constants.c_hat
    out = []
    for r in report.trace:
        k = r.k
        _flag(out, "level_set", k, r.f_val, f0, SLACK)
        if sgm:
            _flag(out, "f_below_reference", k, r.f_val, r.T, SLACK * max(1.0, abs(r.T)))
        if r.lam <= 0:
            continue
        u = ROUNDING * (1.0 + r.x_norm)
        rhs = -r.d_dinv_sq / r.alpha
        _flag(out, "descent", k, r.grad_dot_d, rhs, SLACK * max(1.0, abs(rhs)) + u * r.grad_norm)
        _flag(out, "direction_bound", k, r.d_norm, mu**3 * amax * r.grad_norm, SLACK * r.grad_norm + u)
        if sgm:
            _flag(out, "trial_step_floor", k, 1.0 / (mu * amax), r.s, (SLACK + 2.0 * u / r.d_norm) * max(1.0, r.s))
            _flag(out, "accepted_below_reference", k, r.f_next, r.T, SLACK * max(1.0, abs(r.T)))
            _flag(out, "reference_nonincreasing", k, r.T_next, r.T, SLACK * max(1.0, abs(r.T)))
            # when the model decrease at s is below the resolution of f, a rejected
            # trial says nothing about curvature and the floor argument does not apply
            if -r.s * r.grad_dot_d > ROUNDING * max(1.0, abs(r.T)):
                floor_slack = STEP_SLACK + 2.0 * u / r.d_norm * constants.lambda_min_bound
                _flag(out, "step_floor", k, constants.lambda_min_bound, r.lam, floor_slack)
            if np.isfinite(c) and c > 0:
                _flag(out, "step_ceiling", k, r.lam, 1.0 / c, SLACK)
    return out


def sufficient_decrease_check(report, zeta):
    """``T_k - f(x_{k+1}) >= zeta (g.d / |d|)^2`` at every accepted step."""
    out = []
    for r in _steps(report):
        lhs = r.T - r.f_next
        rhs = zeta * (r.grad_dot_d / r.d_norm) ** 2
        # written as rhs <= lhs so the slack loosens the check
        _flag(out, "sufficient_decrease", r.k, rhs, lhs, SLACK * max(1.0, abs(r.T)))
    return out


def error_estimate_check(report, constants):
    """``|g_k|^2 <= (T_k - T_{k+1}) / (kappa (1 - eta_max))`` at every accepted step.

    Returns ``None`` when the measured ``c`` is not positive, in which case
    the direction assumption failed on this trace and the bound does not apply.
    """
    kappa = constants.kappa_hat
    if not (np.isfinite(constants.c_hat) and constants.c_hat > 0 and kappa > 0):
        return None
    denom = kappa * (1.0 - constants.eta_max)
    out = []
    for r in _steps(report):
        lhs = r.grad_norm**2
        rhs = (r.T - r.T_next) / denom
        _flag(out, "error_estimate", r.k, lhs, rhs, SLACK * max(1.0, abs(rhs)))
    return out


@dataclass(frozen=True)
class RateFit:
    theta_hat: float
    r_squared: float
    window: tuple
    log_intercept: float = 0.0

    def envelope_holds(self, errors, e0, slack=0.05):
        """``e_k <= theta^k e_0 (1 + slack)`` for every k in the window."""
        lo, hi = self.window
        ks = np.arange(lo, hi + 1)
        bound = self.theta_hat ** ks * e0 * (1.0 + slack)
        return bool(np.all(np.asarray(errors)[lo: hi + 1] <= bound))


def rate_window(errors, f_star, min_points=5):
    """Leading run of iterations whose error is above the round-off floor."""
    floor = 10.0 * np.finfo(float).eps * max(abs(f_star), 1.0)
    e = np.asarray(errors, dtype=float)
    above = e > floor
    end = len(e) if above.all() else int(np.argmin(above))
    if end < min_points:
        raise InsufficientDataError(
            f"only {end} iterations above the error floor {floor:.2e}; need {min_points}"
        )
    return 0, end - 1


def fit_linear_rate(report, f_star, min_points=5):
    """Least-squares fit of ``log(f_k - f*)`` against ``k``."""
    e = report.column("f_val") - f_star
    lo, hi = rate_window(e, f_star, min_points)
    ks = np.arange(lo, hi + 1, dtype=float)
    y = np.log(e[lo: hi + 1])
    slope, intercept = np.polyfit(ks, y, 1)
    resid = y - (slope * ks + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(np.exp(slope)), r2, (lo, hi), float(intercept))


def strong_quasiconvexity_gap(obj, f_star, L, gamma, points):
    """Largest ``f(x) - f* - (L/gamma^2) |grad f(x)|^2`` over ``points``."""
    if not (L > 0 and gamma > 0):
        raise ValueError("L and gamma must be positive")
    worst = -np.inf
    for x in points:
        rep = obj.evaluate(x)
        gap = rep.value - f_star - (L / gamma**2) * float(rep.gradient @ rep.gradient)
        worst = max(worst, gap)
    return float(worst)


def diagnose(report, L, f_star=None, floor_form="printed"):
    """All checks for one run, as a JSON-ready dict."""
    const = estimate_constants(report, L, floor_form=floor_form)
    props = check_propositions(report, const)
    sgm = report.method == "SGM"
    decrease = sufficient_decrease_check(report, const.zeta_hat) if sgm else []
    estimate = error_estimate_check(report, const) if sgm else []
    out = {
        "method": report.method,
        "constants": const.to_dict(),
        "propositions": [v.to_dict() for v in props],
        "sufficient_decrease": [v.to_dict() for v in decrease],
        "error_estimate": None if estimate is None else [v.to_dict() for v in estimate],
    }
    if f_star is not None:
        try:
            fit = fit_linear_rate(report, f_star)
            out["rate_fit"] = {"theta_hat": fit.theta_hat, "r_squared": fit.r_squared, "window": list(fit.window)}
        except InsufficientDataError as exc:
            out["rate_fit"] = {"error": str(exc)}
    return out
