import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgmopt.errors import BacktrackExhaustedError, NonDescentError
from sgmopt.linesearch import (
    SgmParams,
    SgmRef,
    ZhRef,
    gll_ref_update,
    initial_ref,
    lambda_floor,
    sgm_ref_update,
    sgm_search,
    step_is_exact,
    sufficient_decrease_constant,
    zh_ref_update,
    zh_search,
)
from sgmopt.objectives import CallbackObjective
from sgmopt.projection import BoxSet

SQUARE = CallbackObjective(lambda x: float(x @ x), lambda x: 2 * x, 1)


class TestSgmSearch:
    def test_one_dimensional_example(self):
        # f = x^2 at x = 1, d = -2: s = 1 overshoots to f = 1, half a step lands on 0
        x, d = np.array([1.0]), np.array([-2.0])
        step = sgm_search(SQUARE, x, d, -4.0, SgmRef(1.0), SgmParams())
        assert step.s == pytest.approx(1.0)
        assert step.j == 1
        assert step.lam == pytest.approx(0.5)
        assert step.f_new == pytest.approx(0.0)
        assert step_is_exact(step, 0.5)

    def test_acceptance_inequality_holds(self):
        x, d = np.array([1.0]), np.array([-2.0])
        p = SgmParams()
        step = sgm_search(SQUARE, x, d, -4.0, SgmRef(1.0), p)
        rhs = 1.0 + p.delta1 * step.lam * -4.0 - p.delta2 * step.lam**2 * 4.0
        assert step.f_new <= rhs
        assert step.accepted_condition_lhs_rhs == (step.lhs, step.rhs)

    def test_non_descent_rejected(self):
        with pytest.raises(NonDescentError):
            sgm_search(SQUARE, np.array([1.0]), np.array([1.0]), 2.0, SgmRef(1.0), SgmParams())

    def test_exhausted(self):
        flat = CallbackObjective(lambda x: 1.0, lambda x: np.array([1.0]), 1)
        with pytest.raises(BacktrackExhaustedError):
            sgm_search(flat, np.zeros(1), np.array([-1.0]), -1.0, SgmRef(1.0), SgmParams(max_backtracks=5))

    def test_infeasible_trials_skipped(self):
        box = BoxSet(np.array([0.0]), np.array([1.0]))
        # s = 1 would leave the box; the first feasible trial is 0.5
        step = sgm_search(SQUARE, np.array([1.0]), np.array([-2.0]), -4.0, SgmRef(1.0), SgmParams(), box)
        assert step.lam == pytest.approx(0.5)


class TestParams:
    @pytest.mark.parametrize("kw", [dict(delta1=0.6), dict(delta1=0.0), dict(beta=1.0),
                                    dict(delta2=-1.0), dict(eta_max=1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SgmParams(**kw)


class TestReferences:
    def test_sgm_update(self):
        assert sgm_ref_update(SgmRef(2.0), 1.0, 0.25).T == pytest.approx(1.25)

    def test_sgm_update_eta_bound(self):
        with pytest.raises(ValueError):
            sgm_ref_update(SgmRef(2.0), 1.0, 0.5, eta_max=0.4)

    def test_zh_update(self):
        r = zh_ref_update(ZhRef(2.0, 1.0), 1.0, 0.5)
        assert r.Q == pytest.approx(1.5)
        assert r.C == pytest.approx((0.5 * 2.0 + 1.0) / 1.5)

    def test_gll_window(self):
        r = initial_ref("gll", 5.0, M=2)
        for f in (4.0, 3.0, 2.0):
            r = gll_ref_update(r, f)
        assert r.window == (4.0, 3.0, 2.0)
        assert r.value == 4.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            initial_ref("nope", 1.0)

    def test_zh_search_fixed_trial(self):
        step = zh_search(SQUARE, np.array([1.0]), np.array([-1.0]), -2.0, ZhRef(1.0), 1e-3)
        assert step.lam == 1.0 and step.j == 0


def test_sufficient_decrease_constant_value():
    # the second branch is active for the experiment parameters
    zeta = sufficient_decrease_constant(1e-3, 1e-4, 0.5, 7.99)
    assert zeta == pytest.approx(6.29e-5, rel=2e-3)


def test_lambda_floor_value():
    p = SgmParams()
    assert lambda_floor(p, 2.0, 1.0, 1.0) == pytest.approx(0.999 / 1.0001)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(-5, 5), st.floats(0.05, 0.95), st.floats(1e-4, 0.04))
def test_accepted_step_is_s_beta_power(curv, x0, beta, delta1):
    if abs(x0) < 1e-3:
        return
    f = CallbackObjective(lambda x: 0.5 * curv * float(x @ x), lambda x: curv * x, 1)
    x = np.array([x0])
    d = -f.gradient(x)
    gd = float(f.gradient(x) @ d)
    p = SgmParams(delta1, 1e-4, beta)
    step = sgm_search(f, x, d, gd, SgmRef(f.value(x)), p)
    assert step_is_exact(step, beta)
    assert step.f_new <= f.value(x) + p.delta1 * step.lam * gd - p.delta2 * step.lam**2 * float(d @ d)
