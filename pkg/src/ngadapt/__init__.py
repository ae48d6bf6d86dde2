"""Adaptive Newton-Galerkin backward-Euler solver for semilinear parabolic
problems in one space dimension.

Solves u_t - eps * u_xx = f(u, x, t) on an interval with homogeneous
Dirichlet boundary values, using piecewise-linear finite elements in space,
backward Euler in time, and one Newton linearization per iteration. Residual
indicators split the error into spatial, temporal, and linearization parts
and drive mesh refinement, step-size control, and the Newton loop.
"""

from .controller import (
    ControllerConfig,
    RunResult,
    StepRecord,
    Tolerances,
    initial_mesh,
    run,
)
from .errors import (
    ConfigError,
    InitialDatumError,
    NgAdaptError,
    NonlinearityEvaluationError,
    NonSolvableLinearization,
    SafetyValveExceeded,
    TimeStepUnderflow,
)
from .problems import PROBLEMS, ProblemSpec, make_problem

__all__ = [
    "PROBLEMS",
    "ConfigError",
    "ControllerConfig",
    "InitialDatumError",
    "NgAdaptError",
    "NonlinearityEvaluationError",
    "NonSolvableLinearization",
    "ProblemSpec",
    "RunResult",
    "SafetyValveExceeded",
    "StepRecord",
    "TimeStepUnderflow",
    "Tolerances",
    "initial_mesh",
    "make_problem",
    "run",
]

__version__ = "0.1.0"
