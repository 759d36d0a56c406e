"""Scaled gradient projection with a modified non-monotone line search.

The public surface: feasible sets and projections (:mod:`sgmopt.projection`),
objectives (:mod:`sgmopt.objectives`), the SGM / YWH / ZH drivers
(:mod:`sgmopt.solver`), trace diagnostics (:mod:`sgmopt.diagnostics`) and the
benchmark problems (:mod:`sgmopt.problems`).
"""
from .errors import (
    BacktrackExhaustedError,
    ConfigError,
    DimensionError,
    DomainError,
    InsufficientDataError,
    NonDescentError,
    NumericalError,
    ProjectionError,
    SgmError,
)
from .linalg import SpdMatrix, dnorm_sq, spectral_clip
from .objectives import BoxQuadratic, CallbackObjective, FractionalQuadratic, check_gradient, check_hessian
from .projection import BoxSet, QuadraticBandSet, project_euclidean, project_scaled
from .solver import (
    RunReport,
    ScalingRule,
    Schedules,
    SolverConfig,
    default_config,
    standard_schedules,
    sgm_solve,
    stationarity_gap,
    ywh_solve,
    zh_solve,
)

__version__ = "0.1.0"
