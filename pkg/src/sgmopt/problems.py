"""Constructors for the three benchmark instances and their JSON export.

Random data for the large fractional program comes from :func:`gaussian_stream`:
SplitMix64 (64-bit state, Steele/Lea/Flood constants) feeding Box-Muller.
Each pair of uniforms ``(u1, u2)`` (top 53 bits of consecutive outputs, with
``u1`` mapped into ``(0, 1]``) yields ``r cos(t)`` then ``r sin(t)``. Draw
order: ``A`` (n*n, row-major), ``B`` (n*n), ``a`` (n), ``b`` (n).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .objectives import BoxQuadratic, FractionalQuadratic
from .projection import BoxSet, QuadraticBandSet

log = logging.getLogger(__name__)

GENERATOR_NAME = "splitmix64-boxmuller/1"
EXPERIMENTS = ("ex1_fractional", "ex2_large_fractional", "ex3_box_qp")
ALIASES = {"ex1": "ex1_fractional", "ex2": "ex2_large_fractional", "ex3": "ex3_box_qp"}
DEFAULT_N = {"ex1_fractional": 5, "ex2_large_fractional": 512, "ex3_box_qp": 256}
DEFAULT_SEED = 20240501

# known optimal values reported for the instances
PUBLISHED_FSTAR = {"ex1_fractional": -0.158368, "ex3_box_qp": -6.16771}

EX1_W = np.array(
    [
        [5.0, -1.0, 2.0, 0.0, 2.0],
        [-1.0, 6.0, -1.0, 3.0, 0.0],
        [2.0, -1.0, 3.0, 0.0, 1.0],
        [0.0, 3.0, 0.0, 5.0, 0.0],
        [2.0, 0.0, 1.0, 0.0, 4.0],
    ]
)
EX1_W1 = np.array([1.0, 2.0, -1.0, -2.0, 1.0])
EX1_W2 = np.array([1.0, 0.0, -1.0, 0.0, 1.0])
EX1_V1, EX1_V2 = -2.0, 20.0

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed, count):
    """First ``count`` outputs of SplitMix64 started from ``seed``."""
    state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        z = state + _GOLDEN * np.arange(1, count + 1, dtype=np.uint64)
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        z = z ^ (z >> np.uint64(31))
    return z


def gaussian_stream(seed, count):
    pairs = (count + 1) // 2
    raw = splitmix64(seed, 2 * pairs)
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u1 = 1.0 - u[0::2]  # (0, 1]
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    t = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(t)
    out[1::2] = r * np.sin(t)
    return out[:count]


@dataclass(frozen=True, eq=False)
class Problem:
    name: str
    objective: object
    feasible_set: object
    x0: np.ndarray
    scaling: str
    f_star: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.x0.shape[0]


def build_ex1(x0=None):
    obj = FractionalQuadratic.from_linear_denominator(EX1_W, EX1_W1, EX1_V1, EX1_W2, EX1_V2)
    kset = BoxSet.cube(5)
    if np.linalg.eigvalsh(EX1_W)[0] <= 0:
        raise AssertionError("printed W should be positive definite")
    margin = obj.certify_denominator(kset)
    if margin <= 0:
        raise AssertionError("denominator vanishes on the box")
    x0 = np.ones(5) if x0 is None else np.asarray(x0, float)
    return Problem(
        "ex1_fractional", obj, kset, x0, "hessian-clipped",
        f_star=PUBLISHED_FSTAR["ex1_fractional"], meta={"denominator_margin": margin},
    )


def ex2_data(n, seed):
    z = gaussian_stream(seed, 2 * n * n + 2 * n)
    A = z[: n * n].reshape(n, n)
    B = z[n * n: 2 * n * n].reshape(n, n)
    a = 0.1 * z[2 * n * n: 2 * n * n + n]
    b = 0.05 * z[2 * n * n + n:]
    A = 0.5 * (A + A.T)
    A = A + (abs(np.linalg.eigvalsh(A)[0]) + 0.1) * np.eye(n)
    B = 0.5 * (B + B.T)
    lam, Q = np.linalg.eigh(B)
    B = (Q * np.maximum(lam, 0.0)) @ Q.T
    B = 0.5 * (B + B.T)
    return A, B, a, b


def build_ex2(seed=DEFAULT_SEED, n=512, x0=None):
    A, B, a, b = ex2_data(n, seed)
    alpha, beta, m, M = 1.0, 100.0, -1.0, 1.0
    obj = FractionalQuadratic(A, a, alpha, B, b, beta)
    # the band applies to 1/2 x^T B x + b^T x; the offset beta belongs to the
    # denominator only, otherwise the denominator would range over [m, M] and vanish on K
    kset = QuadraticBandSet(B, b, 0.0, m, M)
    log.info(
        "ex2: numerator-nonpositivity hypothesis cannot hold with positive definite A and alpha=%g; "
        "instance used as a performance comparison only", alpha,
    )
    x0 = np.ones(n) if x0 is None else np.asarray(x0, float)
    return Problem(
        "ex2_large_fractional", obj, kset, x0, "hessian",
        meta={"seed": int(seed), "generator": GENERATOR_NAME, "hypothesis_numerator_nonpositive": False},
    )


def ex3_matrices(n):
    V = 2.0 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1)
    W = 3.0 * np.eye(n) + 0.5 * (np.eye(n, k=1) + np.eye(n, k=-1))
    p = np.zeros(n)
    p[0] = 1.0
    return V, W, p


def build_ex3(n=256, x0_scale=0.8):
    if n < 2:
        raise ValueError("ex3 needs n >= 2")
    V, W, p = ex3_matrices(n)
    obj = BoxQuadratic(V, W, p)
    return Problem(
        "ex3_box_qp", obj, BoxSet.cube(n), x0_scale * np.ones(n), "constant",
        f_star=PUBLISHED_FSTAR["ex3_box_qp"] if n == 256 else None,
        meta={"gamma": obj.gamma, "lipschitz": obj.lipschitz},
    )


def build(name, n=None, seed=DEFAULT_SEED, x0_ones=False):
    name = ALIASES.get(name, name)
    if name == "ex1_fractional":
        if n not in (None, 5):
            raise ValueError("ex1 is fixed at n = 5")
        return build_ex1()
    if name == "ex2_large_fractional":
        return build_ex2(seed, n or DEFAULT_N[name])
    if name == "ex3_box_qp":
        return build_ex3(n or DEFAULT_N[name], 1.0 if x0_ones else 0.8)
    raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")


def export_problem(problem):
    """JSON-ready dict: matrices as row-major nested lists plus metadata."""
    obj, kset = problem.objective, problem.feasible_set
    data = {"name": problem.name, "n": problem.n, "x0": problem.x0.tolist(), "meta": problem.meta}
    if isinstance(obj, FractionalQuadratic):
        data["objective"] = {
            "kind": "fractional_quadratic",
            "A": obj.W_num.tolist(), "a": obj.a_num.tolist(), "alpha": obj.alpha_num,
            "B": obj.B_den.tolist(), "b": obj.b_den.tolist(), "beta": obj.beta_den,
        }
    else:
        data["objective"] = {"kind": "box_quadratic", "V": obj.V.tolist(), "W": obj.W.tolist(), "p": obj.p.tolist()}
    if isinstance(kset, BoxSet):
        data["feasible_set"] = {"kind": "box", "lower": kset.lower.tolist(), "upper": kset.upper.tolist()}
    else:
        data["feasible_set"] = {
            "kind": "quadratic_band", "B": kset.B.tolist(), "b": kset.b.tolist(),
            "beta": kset.beta, "m": kset.m, "M": kset.M,
        }
    return data


def write_problem_json(problem, path):
    with open(path, "w") as fh:
        json.dump(export_problem(problem), fh)
