import json

import numpy as np
import pytest

from sgmopt import problems
from sgmopt.problems import build, build_ex1, build_ex2, build_ex3, export_problem, gaussian_stream, splitmix64


class TestGenerator:
    def test_splitmix64_reference_output(self):
        # published first output of SplitMix64 from seed 0
        assert int(splitmix64(0, 1)[0]) == 0xE220A8397B1DCDAF

    def test_deterministic(self):
        assert np.array_equal(gaussian_stream(7, 101), gaussian_stream(7, 101))

    def test_prefix_stable(self):
        assert np.array_equal(gaussian_stream(7, 10), gaussian_stream(7, 11)[:10])

    def test_roughly_standard_normal(self):
        z = gaussian_stream(3, 20000)
        assert abs(z.mean()) < 0.03
        assert abs(z.std() - 1.0) < 0.03


class TestEx1:
    def test_shape_and_start(self):
        p = build_ex1()
        assert p.n == 5
        assert np.array_equal(p.x0, np.ones(5))
        assert p.f_star == pytest.approx(-0.158368)

    def test_denominator_positive_on_box(self):
        assert build_ex1().meta["denominator_margin"] > 0


class TestEx2:
    def test_matrices(self):
        A, B, a, b = problems.ex2_data(32, problems.DEFAULT_SEED)
        assert np.linalg.eigvalsh(A)[0] > 0
        assert np.linalg.eigvalsh(B)[0] > -1e-10
        assert np.allclose(A, A.T) and np.allclose(B, B.T)

    def test_denominator_bounded_away_from_zero_on_band(self, rng):
        p = build_ex2(n=32)
        K = p.feasible_set
        from sgmopt.projection import project_euclidean

        for _ in range(20):
            x = project_euclidean(K, rng.normal(0, 2, 32))
            assert 99.0 - 1e-8 <= p.objective.denominator(x) <= 101.0 + 1e-8

    def test_seed_changes_data(self):
        A1 = problems.ex2_data(8, 1)[0]
        A2 = problems.ex2_data(8, 2)[0]
        assert not np.allclose(A1, A2)


class TestEx3:
    def test_spectrum(self):
        p = build_ex3()
        assert p.meta["gamma"] == pytest.approx(1.4942e-4, rel=1e-4)
        assert p.meta["lipschitz"] == pytest.approx(7.9997, rel=1e-4)

    def test_start(self):
        assert np.allclose(build_ex3().x0, 0.8)
        assert np.allclose(build("ex3", x0_ones=True).x0, 1.0)

    def test_published_value_only_at_default_size(self):
        assert build_ex3(256).f_star is not None
        assert build_ex3(16).f_star is None

    def test_too_small(self):
        with pytest.raises(ValueError):
            build_ex3(1)


def test_build_unknown():
    with pytest.raises(ValueError):
        build("ex9")


def test_ex1_fixed_dimension():
    with pytest.raises(ValueError):
        build("ex1", n=6)


@pytest.mark.parametrize("name,n", [("ex1", None), ("ex2", 8), ("ex3", 8)])
def test_export_round_trips_through_json(name, n):
    p = build(name, n)
    data = json.loads(json.dumps(export_problem(p)))
    assert data["n"] == p.n
    assert len(data["x0"]) == p.n
    assert data["objective"]["kind"] in ("fractional_quadratic", "box_quadratic")
