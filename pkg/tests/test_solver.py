import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_spd
from sgmopt.linesearch import SgmParams
from sgmopt.objectives import BoxQuadratic, CallbackObjective
from sgmopt.problems import build_ex1, build_ex3
from sgmopt.projection import BoxSet
from sgmopt.solver import (
    STATUSES,
    Schedules,
    ScalingRule,
    SolverConfig,
    default_config,
    sgm_solve,
    standard_schedules,
    stationarity_gap,
    ywh_solve,
    zh_solve,
)


def separable_quadratic(c):
    """``1/2 |x - c|^2``, minimised over the unit cube at ``clip(c)``."""
    c = np.asarray(c, float)
    return CallbackObjective(lambda x: 0.5 * float((x - c) @ (x - c)), lambda x: x - c, c.shape[0],
                             hess=lambda x: np.eye(c.shape[0]))


def small_config(n, max_iters=200, **kw):
    sched = standard_schedules(n)
    return SolverConfig(sched, SgmParams(eta_max=sched.eta_max), ScalingRule("hessian_clipped"),
                        max_iters=max_iters, **kw)


class TestSchedules:
    def test_standard_values(self):
        s = standard_schedules(5)
        a, e, m = s.at(0)
        assert a == pytest.approx(1 - 1 / np.sqrt(6))
        assert e == pytest.approx(a)
        assert m == pytest.approx(1 + 1 / 36)

    def test_out_of_band_rejected(self):
        s = Schedules(lambda k: 2.0, lambda k: 0.1, lambda k: 1.0, 0.5, 1.0, 0.5, 1.25)
        with pytest.raises(ValueError):
            s.at(0)

    def test_invalid_bands(self):
        with pytest.raises(ValueError):
            Schedules(lambda k: 1, lambda k: 0, lambda k: 1, 0.0, 1.0, 0.5, 1.25)
        with pytest.raises(ValueError):
            Schedules(lambda k: 1, lambda k: 0, lambda k: 1, 1.0, 1.0, 1.0, 1.25)

    def test_n_positive(self):
        with pytest.raises(ValueError):
            standard_schedules(0)


class TestConfig:
    def test_bad_max_iters(self):
        with pytest.raises(ValueError):
            SolverConfig(standard_schedules(2), max_iters=0)

    def test_bad_scaling(self):
        with pytest.raises(ValueError):
            ScalingRule("cholesky")
        with pytest.raises(ValueError):
            ScalingRule("constant")


class TestSgm:
    def test_separable_solution(self):
        c = np.array([2.0, -0.3, -4.0])
        f = separable_quadratic(c)
        rep = sgm_solve(f, BoxSet.cube(3), np.zeros(3), small_config(3))
        assert rep.status in ("converged_dnorm", "converged_grad")
        assert np.allclose(rep.final_x, np.clip(c, -1, 1), atol=1e-8)

    def test_infeasible_start_is_projected(self):
        f = separable_quadratic([0.5, 0.5])
        rep = sgm_solve(f, BoxSet.cube(2), np.array([5.0, -5.0]), small_config(2))
        assert rep.trace[0].x_norm == pytest.approx(np.sqrt(2.0))
        assert np.allclose(rep.final_x, [0.5, 0.5], atol=1e-8)

    def test_max_iters_status(self):
        p = build_ex3(32)
        rep = sgm_solve(p.objective, p.feasible_set, p.x0, default_config(p, max_iters=2))
        assert rep.status == "max_iters"
        assert rep.iterations == 2

    def test_ex1_reaches_known_value(self):
        p = build_ex1()
        rep = sgm_solve(p.objective, p.feasible_set, p.x0, default_config(p, max_iters=200))
        assert rep.status in STATUSES
        assert abs(rep.final.f_val - p.f_star) <= 1e-6
        assert stationarity_gap(p.objective, p.feasible_set, rep.final_x, 0.5) < 1e-6

    def test_reference_invariants(self):
        p = build_ex1()
        rep = sgm_solve(p.objective, p.feasible_set, p.x0, default_config(p))
        for r in rep.trace[:-1]:
            assert r.f_next <= r.T + 1e-12
            assert r.T_next <= r.T + 1e-12
            assert r.lam == pytest.approx(r.s * 0.5**r.j, rel=1e-15)

    def test_iterates_stay_feasible(self):
        p = build_ex3(64)
        rep = sgm_solve(p.objective, p.feasible_set, p.x0, default_config(p))
        assert p.feasible_set.contains(rep.final_x, 0.0)


class TestBaselines:
    def test_zh_uses_identity(self):
        p = build_ex1()
        rep = zh_solve(p.objective, p.feasible_set, p.x0, default_config(p))
        assert all(r.mu_eff == 1.0 for r in rep.trace)
        assert rep.config.linesearch.delta2 == 0.0

    def test_ywh_fixed_trial_step(self):
        p = build_ex1()
        rep = ywh_solve(p.objective, p.feasible_set, p.x0, default_config(p))
        assert all(r.s == 1.0 for r in rep.trace if r.lam > 0)
        assert rep.config.linesearch.delta2 == 0.0

    @pytest.mark.parametrize("solve", [sgm_solve, ywh_solve, zh_solve])
    def test_all_methods_solve_ex3_small(self, solve):
        p = build_ex3(16)
        rep = solve(p.objective, p.feasible_set, p.x0, default_config(p, max_iters=2000))
        assert stationarity_gap(p.objective, p.feasible_set, rep.final_x, 0.1) < 1e-5


def test_stationarity_gap_rejects_bad_alpha():
    f = separable_quadratic([0.0])
    with pytest.raises(ValueError):
        stationarity_gap(f, BoxSet.cube(1), np.zeros(1), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_sgm_solves_random_box_qp(n, seed):
    rng = np.random.default_rng(seed)
    V = random_spd(rng, n, -1, 1)
    W = random_spd(rng, n, -1, 1)
    f = BoxQuadratic(V, W, rng.normal(0, 2, n))
    kset = BoxSet.cube(n)
    cfg = SolverConfig(standard_schedules(n), SgmParams(eta_max=standard_schedules(n).eta_max),
                       ScalingRule("hessian_literal"), max_iters=500)
    rep = sgm_solve(f, kset, np.zeros(n), cfg)
    assert rep.status != "linesearch_failure" or rep.final.d_norm < 1e-6
    assert stationarity_gap(f, kset, rep.final_x, 0.5) < 1e-6
    f_vals = rep.column("f_val")
    assert f_vals[-1] <= f_vals[0] + 1e-12
