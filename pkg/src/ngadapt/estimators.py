"""Residual indicators for one linearized backward-Euler step.

The step residual splits into three parts, measured per element K of the
step's mesh. With u_next = u_lin + delta the accepted iterate, u_prev the
previous solution (possibly on another mesh), k the step size, and weights
alpha = min(1, h / sqrt(eps)):

spatial      eta_K^2 = alpha_K^2 || f(u_lin) + f_u(u_lin) delta
                                    - (u_next - u_prev) / k ||_K^2
                       + 1/2 sum over interior endpoints E of K of
                         eps^(-1/2) alpha_E (eps [grad u_next]_E)^2
             (the second derivative of a piecewise-linear iterate vanishes
             inside elements, so only data and jump terms remain)

temporal     theta_K^2 = || f(u_next, t_n) - f(u_prev, t_prev) ||_K^2
                         + eps / 3 || grad(u_prev - u_next) ||_K^2
             (the first term is the two-point surrogate of the exact-in-time
             residual norm over the step, divided by k)

linearization  upsilon_K^2 = || f(u_lin) + f_u(u_lin) delta - f(u_next) ||_K^2

Reaction terms are frozen at the step's end time. Integrals involving u_prev
run over the union partition of the two meshes; single-mesh terms use the
3-point Gauss rule per element. The accumulated certificate is

    E_n = eta0^2 + sum over accepted steps of k (eta^2 + theta^2 + upsilon^2),

with eta0 the initial-datum projection error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .fem import FeFunction
from .mesh import weights
from .problems import ProblemSpec


@dataclass(frozen=True, eq=False)
class IndicatorSet:
    """Per-element indicator squares of one candidate step."""

    k: float
    t_n: float
    eta_sq: np.ndarray
    theta_sq: np.ndarray
    upsilon_sq: np.ndarray

    @property
    def eta_sq_total(self) -> float:
        return float(np.sum(self.eta_sq))

    @property
    def theta_sq_total(self) -> float:
        return float(np.sum(self.theta_sq))

    @property
    def upsilon_sq_total(self) -> float:
        return float(np.sum(self.upsilon_sq))

    @property
    def total_sq(self) -> float:
        return self.eta_sq_total + self.theta_sq_total + self.upsilon_sq_total


class _UnionContext:
    """Union-partition quadrature shared by the spatial and temporal parts.

    Everything here depends only on the two meshes and the four functions,
    so one candidate evaluation can feed both indicator families.
    """

    def __init__(self, u_next, delta, u_lin, u_prev):
        mesh = u_next.mesh
        self.un = fem.union_nodes(mesh, u_prev.mesh)
        self.pts, self.wts = fem.partition_quadrature(self.un)
        self.elem = mesh.element_of(self.pts)
        self.u_next = u_next(self.pts)
        self.u_prev = u_prev(self.pts)
        self.u_lin = u_lin(self.pts)
        self.delta = delta(self.pts)


def _spatial_from(ctx: _UnionContext, u_next, k, t_n, problem) -> np.ndarray:
    mesh = u_next.mesh
    eps = problem.eps
    w = weights(mesh, eps)
    pts = ctx.pts
    lin_source = problem.f(ctx.u_lin, pts, t_n) + problem.dfu(ctx.u_lin, pts, t_n) * ctx.delta
    resid = lin_source - (ctx.u_next - ctx.u_prev) / k
    vol = np.bincount(ctx.elem, weights=ctx.wts * resid * resid,
                      minlength=mesh.num_elements)
    eta_sq = w.alpha_elem ** 2 * vol

    jumps = fem.gradient_jumps(u_next)
    edge = eps ** 1.5 * w.alpha_node * jumps ** 2
    eta_sq[:-1] += 0.5 * edge
    eta_sq[1:] += 0.5 * edge
    return eta_sq


def _temporal_from(ctx: _UnionContext, u_next, u_prev, k, t_n, t_prev,
                   problem) -> np.ndarray:
    mesh = u_next.mesh
    pts = ctx.pts
    df = problem.f(ctx.u_next, pts, t_n) - problem.f(ctx.u_prev, pts, t_prev)
    source_part = np.bincount(ctx.elem, weights=ctx.wts * df * df,
                              minlength=mesh.num_elements)

    un = ctx.un
    mid = 0.5 * (un[:-1] + un[1:])
    ds = u_prev.slope_at(mid) - u_next.slope_at(mid)
    grad_part = np.bincount(mesh.element_of(mid), weights=np.diff(un) * ds * ds,
                            minlength=mesh.num_elements)
    return source_part + (problem.eps / 3.0) * grad_part


def spatial_indicators(u_next: FeFunction, delta: FeFunction, u_lin: FeFunction,
                       u_prev: FeFunction, k: float, t_n: float,
                       problem: ProblemSpec) -> np.ndarray:
    """Per-element squares of the spatial indicator."""
    ctx = _UnionContext(u_next, delta, u_lin, u_prev)
    return _spatial_from(ctx, u_next, k, t_n, problem)


def temporal_indicators(u_next: FeFunction, u_prev: FeFunction, k: float,
                        t_n: float, t_prev: float,
                        problem: ProblemSpec) -> np.ndarray:
    """Per-element squares of the temporal indicator."""
    ctx = _UnionContext(u_next, u_next, u_next, u_prev)
    return _temporal_from(ctx, u_next, u_prev, k, t_n, t_prev, problem)


def nonlinear_indicators(u_next: FeFunction, delta: FeFunction, u_lin: FeFunction,
                         t_n: float, problem: ProblemSpec) -> np.ndarray:
    """Per-element squares of the linearization indicator."""
    mesh = u_next.mesh
    pts, wts = fem.partition_quadrature(mesh.nodes)
    defect = problem.f(u_lin(pts), pts, t_n) + problem.dfu(u_lin(pts), pts, t_n) * delta(pts) \
        - problem.f(u_next(pts), pts, t_n)
    elem = mesh.element_of(pts)
    return np.bincount(elem, weights=wts * defect * defect, minlength=mesh.num_elements)


def indicator_set(u_next: FeFunction, delta: FeFunction, u_lin: FeFunction,
                  u_prev: FeFunction, k: float, t_n: float, t_prev: float,
                  problem: ProblemSpec) -> IndicatorSet:
    """All three indicator families for one candidate step."""
    ctx = _UnionContext(u_next, delta, u_lin, u_prev)
    return IndicatorSet(
        k=k,
        t_n=t_n,
        eta_sq=_spatial_from(ctx, u_next, k, t_n, problem),
        theta_sq=_temporal_from(ctx, u_next, u_prev, k, t_n, t_prev, problem),
        upsilon_sq=nonlinear_indicators(u_next, delta, u_lin, t_n, problem),
    )


@dataclass
class ErrorLedger:
    """Running certificate E_n = eta0^2 + sum of k (eta^2 + theta^2 + ups^2)."""

    eta0: float
    ks: list[float] = field(default_factory=list)
    eta_sqs: list[float] = field(default_factory=list)
    theta_sqs: list[float] = field(default_factory=list)
    upsilon_sqs: list[float] = field(default_factory=list)

    @property
    def bound_sq(self) -> float:
        return self.recomputed_bound_sq()

    @property
    def bound_sqrt(self) -> float:
        return float(np.sqrt(self.bound_sq))

    def recomputed_bound_sq(self) -> float:
        total = self.eta0 ** 2
        for k, e, t, u in zip(self.ks, self.eta_sqs, self.theta_sqs, self.upsilon_sqs):
            total += k * (e + t + u)
        return total

    def bound_sq_history(self) -> np.ndarray:
        """E_n after each accepted step."""
        out = np.empty(len(self.ks))
        total = self.eta0 ** 2
        for j, (k, e, t, u) in enumerate(zip(self.ks, self.eta_sqs,
                                             self.theta_sqs, self.upsilon_sqs)):
            total += k * (e + t + u)
            out[j] = total
        return out


def accumulate(ledger: ErrorLedger, accepted: IndicatorSet) -> ErrorLedger:
    """Fold an accepted step into the certificate; returns the ledger."""
    ledger.ks.append(accepted.k)
    ledger.eta_sqs.append(accepted.eta_sq_total)
    ledger.theta_sqs.append(accepted.theta_sq_total)
    ledger.upsilon_sqs.append(accepted.upsilon_sq_total)
    return ledger


def decomposition_check(u_prev: FeFunction, u_lin: FeFunction, delta: FeFunction,
                        u_next: FeFunction, k: float, t_prev: float, t_n: float,
                        v: FeFunction, problem: ProblemSpec,
                        n_times: int = 5) -> float:
    """Defect of the residual splitting, tested against one test function.

    The full residual of the time interpolant u_I, paired with v, must equal
    the sum of its spatial, temporal, and linearization parts at every time
    inside the step. Returns the largest relative defect over sampled times.
    The mesh of v should contain the meshes of both solutions so that v can
    resolve them.
    """
    un = np.union1d(fem.union_nodes(u_prev.mesh, u_next.mesh), v.mesh.nodes)
    pts, wts = fem.partition_quadrature(un)

    vv = v(pts)
    dv = v.slope_at(pts)
    eps = problem.eps

    prev_v = u_prev(pts)
    next_v = u_next(pts)
    prev_s = u_prev.slope_at(pts)
    next_s = u_next.slope_at(pts)
    dt_ui = (next_v - prev_v) / k

    lin_source = problem.f(u_lin(pts), pts, t_n) \
        + problem.dfu(u_lin(pts), pts, t_n) * delta(pts)
    f_next = problem.f(next_v, pts, t_n)

    worst = 0.0
    for tau in np.linspace(t_prev, t_n, n_times):
        theta_t = (tau - t_prev) / k
        ui = (1.0 - theta_t) * prev_v + theta_t * next_v
        ui_s = (1.0 - theta_t) * prev_s + theta_t * next_s
        f_ui = problem.f(ui, pts, float(tau))

        full = np.sum(wts * (dt_ui * vv + eps * ui_s * dv - f_ui * vv))
        part1 = np.sum(wts * (dt_ui * vv + eps * next_s * dv - lin_source * vv))
        part2 = np.sum(wts * (eps * (ui_s - next_s) * dv + (f_next - f_ui) * vv))
        part3 = np.sum(wts * ((lin_source - f_next) * vv))

        scale = max(abs(full), abs(part1), abs(part2), abs(part3), 1e-30)
        worst = max(worst, abs(full - (part1 + part2 + part3)) / scale)
    return worst
