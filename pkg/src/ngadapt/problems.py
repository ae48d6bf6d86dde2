"""Built-in semilinear problems u_t - eps u_xx = f(u, x, t).

All reaction callables are vectorized: u and x are arrays of equal shape, t is
a scalar, and the result has the shape of x. Initial data vanish at the domain
endpoints (the trial space has zero trace).

linear_exp_source   source exp(t), no u dependence; the initial datum is the
                    boundary-layer profile solving -eps g'' + g = 1, g(0) =
                    g(1) = 0, so the exact solution is exp(t) g(x).
quartic_absorption  f = -u^4 + sin(t), zero initial datum; layers of width
                    sqrt(eps) build up at both endpoints as u grows.
power_blowup        f = u^beta with a centered Gaussian initial bump; the
                    solution blows up in finite time near the bump's peak.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form solution with its space derivative, both vectorized in x."""

    u: Callable[[np.ndarray, float], np.ndarray]
    ux: Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    """A semilinear parabolic problem on an interval with zero boundary data."""

    name: str
    eps: float
    domain: tuple[float, float]
    t_final: float
    f: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    dfu: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    exact: Optional[ExactSolution] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if not self.domain[1] > self.domain[0]:
            raise ValueError("empty domain")
        if self.t_final <= 0.0:
            raise ValueError("final time must be positive")


def layer_profile(eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """Solution of -eps g'' + g = 1 on (0, 1) with zero boundary values.

    Written with non-positive exponents only, so it is overflow-safe for any
    positive eps.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    s = np.sqrt(eps)

    def g(x):
        x = np.asarray(x, dtype=float)
        scale = 1.0 + np.exp(-1.0 / s)
        return 1.0 - (np.exp(-x / s) + np.exp(-(1.0 - x) / s)) / scale

    return g


def layer_profile_dx(eps: float) -> Callable[[np.ndarray], np.ndarray]:
    """Space derivative of layer_profile(eps)."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    s = np.sqrt(eps)

    def gx(x):
        x = np.asarray(x, dtype=float)
        scale = s * (1.0 + np.exp(-1.0 / s))
        return (np.exp(-x / s) - np.exp(-(1.0 - x) / s)) / scale

    return gx


def linear_exp_source(eps: float, t_final: float = 1.0) -> ProblemSpec:
    """Linear problem with source exp(t) and the layer profile as datum.

    Since the datum solves -eps g'' + g = 1, the exact solution is
    u(x, t) = exp(t) g(x); it is attached in closed form.
    """
    g = layer_profile(eps)
    gx = layer_profile_dx(eps)
    exact = ExactSolution(
        u=lambda x, t: np.exp(t) * g(x),
        ux=lambda x, t: np.exp(t) * gx(x),
    )
    return ProblemSpec(
        name="linear_exp_source",
        eps=eps,
        domain=(0.0, 1.0),
        t_final=t_final,
        f=lambda u, x, t: np.full_like(np.asarray(x, dtype=float), np.exp(t)),
        dfu=lambda u, x, t: np.zeros_like(np.asarray(x, dtype=float)),
        g=g,
        exact=exact,
    )


def quartic_absorption(eps: float, t_final: float = 2.0) -> ProblemSpec:
    """f = -u^4 + sin(t) with zero initial datum."""
    return ProblemSpec(
        name="quartic_absorption",
        eps=eps,
        domain=(0.0, 1.0),
        t_final=t_final,
        f=lambda u, x, t: -np.asarray(u, dtype=float) ** 4 + np.sin(t),
        dfu=lambda u, x, t: -4.0 * np.asarray(u, dtype=float) ** 3,
        g=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    )


def power_blowup(eps: float, beta: float = 4.0, amp: float = 2.0,
                 width: float = 0.5, t_final: float = 0.1) -> ProblemSpec:
    """f = u^beta with a Gaussian bump amp * exp(-((x - 2) / width)^2).

    Domain (0, 4). The bump is below 1e-6 at the endpoints and is clipped to
    exactly zero there. For non-integer beta the reaction is only defined for
    non-negative u; a negative iterate then surfaces as an evaluation error.
    """
    if beta <= 1.0:
        raise ValueError("need beta > 1 for finite-time blow-up")

    def g(x):
        x = np.asarray(x, dtype=float)
        vals = amp * np.exp(-(((x - 2.0) / width) ** 2))
        return np.where((x <= 0.0) | (x >= 4.0), 0.0, vals)

    return ProblemSpec(
        name="power_blowup",
        eps=eps,
        domain=(0.0, 4.0),
        t_final=t_final,
        f=lambda u, x, t: np.asarray(u, dtype=float) ** beta,
        dfu=lambda u, x, t: beta * np.asarray(u, dtype=float) ** (beta - 1.0),
        g=g,
        params={"beta": beta, "amp": amp, "width": width},
    )


PROBLEMS: dict[str, Callable[..., ProblemSpec]] = {
    "linear_exp_source": linear_exp_source,
    "quartic_absorption": quartic_absorption,
    "power_blowup": power_blowup,
}


def make_problem(name: str, eps: float, **overrides) -> ProblemSpec:
    """Build a registered problem by name."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem '{name}', choose from {sorted(PROBLEMS)}") from None
    return factory(eps, **overrides)


def derivative_audit(problem: ProblemSpec, n_samples: int = 200,
                     u_lo: float = -2.0, u_hi: float = 2.0, seed: int = 0) -> float:
    """Max relative deviation of dfu from a central difference of f.

    Samples (u, x, t) uniformly; the difference step is scaled with |u|. For
    reactions defined for non-negative u only, pass u_lo >= 0.
    """
    rng = np.random.default_rng(seed)
    a, b = problem.domain
    u = rng.uniform(u_lo, u_hi, n_samples)
    x = rng.uniform(a, b, n_samples)
    worst = 0.0
    for t in rng.uniform(0.0, problem.t_final, 5):
        h = 1e-6 * (1.0 + np.abs(u))
        fd = (problem.f(u + h, x, float(t)) - problem.f(u - h, x, float(t))) / (2.0 * h)
        exact = problem.dfu(u, x, float(t))
        scale = np.maximum(1.0, np.abs(exact))
        worst = max(worst, float(np.max(np.abs(fd - exact) / scale)))
    return worst
