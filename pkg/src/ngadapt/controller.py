"""Adaptive time-stepping driver.

Each step runs the same certify-or-improve loop. Entering step n the mesh may
first be coarsened where the previous step's spatial indicators were far
below average, guarded by the transfer defect of the previous solution. Then
candidates are produced: one linearized backward-Euler solve gives u_next and
the increment delta, and the three indicator families are evaluated. If the
summed certificate eta^2 + theta^2 + upsilon^2 stays within the summed local
tolerances the step is accepted and the step size grows by kappa for the next
step. Otherwise the dominant error source decides the response:

  spatial dominates     eta^2 > theta^2 + upsilon^2   refine marked elements,
                        redo the same linearized solve on the finer mesh (the
                        linearization point transfers exactly);
  temporal dominates    upsilon < theta               shrink k by sigma and
                        restart the step from the post-coarsening state;
  otherwise             take another Newton iteration on the same mesh.

Safety valves bound the Newton iterations and refinement passes per attempted
step size; the shrink branch resets them. A step size below k_min ends the
run with termination "step-underflow" instead of looping forever, which is
the expected exit for problems whose solution blows up in finite time.

Accepted steps accumulate k (eta^2 + theta^2 + upsilon^2) into the running
certificate E_n on top of the initial projection error squared, so a
completed run satisfies sqrt(E_M) <= sqrt(eps0^2 + T sum of local tol^2) by
construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    InitialDatumError,
    NonlinearityEvaluationError,
    NonSolvableLinearization,
    SafetyValveExceeded,
)
from .estimators import ErrorLedger, IndicatorSet, accumulate, indicator_set
from .fem import (
    FeFunction,
    l2_diff,
    l2_error_callable,
    l2_error_sq_per_element,
    l2_project,
    transfer_refined,
)
from .mesh import Mesh, coarsen, rebase, refine, uniform_mesh
from .newton import NewtonState, newton_step
from .problems import ProblemSpec

# snap tolerance for hitting the final time exactly
_SNAP_REL = 1e-12


@dataclass(frozen=True)
class Tolerances:
    """Local (per unit sqrt-time) tolerances for the four error sources.

    eps0 bounds the initial projection error and doubles as the coarsening
    guard. The other three bound the per-step indicator totals; a run over
    [0, T] that respects them certifies a total error of at most
    sqrt(eps0^2 + T (eta^2 + theta^2 + upsilon^2)).
    """

    eps0: float
    eta: float
    theta: float
    upsilon: float

    def __post_init__(self):
        for name in ("eps0", "eta", "theta", "upsilon"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def uniform(cls, tol: float) -> "Tolerances":
        """All four local tolerances equal to tol."""
        return cls(tol, tol, tol, tol)

    @classmethod
    def from_total(cls, eps0: float, eta: float, theta: float, upsilon: float,
                   t_final: float) -> "Tolerances":
        """Split whole-interval budgets into local ones by sqrt(T)."""
        s = np.sqrt(t_final)
        return cls(eps0, eta / s, theta / s, upsilon / s)

    def local_sum_sq(self) -> float:
        return self.eta ** 2 + self.theta ** 2 + self.upsilon ** 2

    def total_bound(self, t_final: float) -> float:
        """The certified ceiling sqrt(E_M) cannot exceed on [0, t_final]."""
        return float(np.sqrt(self.eps0 ** 2 + t_final * self.local_sum_sq()))


@dataclass(frozen=True)
class ControllerConfig:
    t_final: float
    k0: float
    kappa: float = 2.0          # step growth after acceptance
    sigma: float = 0.5          # step shrink when time error dominates
    k_min: float = 1e-12
    theta_mark: float = 0.5     # maximum marking threshold on the squared scale
    coarsen_factor: float = 0.1  # mark eta_K below this times the mean
    max_newton: int = 50        # per attempted step size
    max_refinements: int = 30   # per attempted step size

    def __post_init__(self):
        if self.t_final <= 0.0:
            raise ValueError("t_final must be positive")
        if not 0.0 < self.k0 <= self.t_final:
            raise ValueError("k0 must lie in (0, t_final]")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("sigma must lie in (0, 1)")
        if self.kappa < 1.0:
            raise ValueError("kappa must be at least 1")
        if not 0.0 < self.k_min <= self.k0:
            raise ValueError("k_min must lie in (0, k0]")
        if not 0.0 < self.theta_mark <= 1.0:
            raise ValueError("theta_mark must lie in (0, 1]")
        if self.coarsen_factor < 0.0:
            raise ValueError("coarsen_factor must be nonnegative")


@dataclass(frozen=True)
class StepRecord:
    """Bookkeeping for one accepted step."""

    index: int
    t: float                 # end time of the step
    k: float
    newton_iters: int        # linearized solves spent, all attempts included
    refinements: int         # refinement passes that survived to acceptance
    shrinks: int             # step-size reductions within the step
    n_elements: int          # mesh size at acceptance
    coarsened: int           # elements removed entering the step
    rollback: bool           # coarsening undone by the guard
    eta_sq: float
    theta_sq: float
    upsilon_sq: float
    bound_sq: float          # cumulative certificate E_n after this step
    wall_time: float = 0.0   # seconds spent on the step, attempts included


@dataclass
class RunResult:
    problem: ProblemSpec
    tolerances: Tolerances
    config: ControllerConfig
    eta0: float
    steps: list[StepRecord]
    ledger: ErrorLedger
    termination: str                     # "final-time" or "step-underflow"
    mesh: Mesh
    u: FeFunction
    trajectory: list[tuple[float, np.ndarray, np.ndarray]]
    total_newton: int = 0
    total_refinements: int = 0
    coarsen_rollbacks: int = 0

    @property
    def t_end(self) -> float:
        return self.steps[-1].t if self.steps else 0.0

    @property
    def bound_sqrt(self) -> float:
        return self.ledger.bound_sqrt

    def triples(self) -> list[tuple[float, np.ndarray, np.ndarray]]:
        """Trajectory as (t, nodes, values), including the initial frame."""
        return self.trajectory


def mark_for_refinement(eta_sq: np.ndarray, theta_mark: float) -> np.ndarray:
    """Maximum strategy: elements with eta_K^2 >= theta_mark * max eta_K^2."""
    if eta_sq.size == 0:
        return np.empty(0, dtype=int)
    cutoff = theta_mark * float(eta_sq.max())
    return np.flatnonzero(eta_sq >= cutoff)


def mark_for_coarsening(eta_elem: np.ndarray, factor: float) -> np.ndarray:
    """Elements whose indicator sits below factor times the mean."""
    if eta_elem.size == 0 or factor <= 0.0:
        return np.empty(0, dtype=int)
    return np.flatnonzero(eta_elem < factor * float(eta_elem.mean()))


def initial_mesh(problem: ProblemSpec, eps0: float, m0: int = 8,
                 theta_mark: float = 0.5, max_rounds: int = 60) -> Mesh:
    """Refine a uniform mesh until the datum projects within eps0.

    The result is rebased, so the run's coarsening never undercuts the
    resolution the initial datum required.
    """
    a, b = problem.domain
    mesh = uniform_mesh(a, b, m0)
    for _ in range(max_rounds):
        u0 = l2_project(problem.g, mesh)
        err_sq = l2_error_sq_per_element(problem.g, u0)
        if float(np.sqrt(err_sq.sum())) <= eps0:
            return rebase(mesh)
        mesh, _ = refine(mesh, mark_for_refinement(err_sq, theta_mark))
    raise SafetyValveExceeded(
        f"initial datum still above {eps0:g} after {max_rounds} refinement rounds")


def _coarsening_pass(mesh: Mesh, u_prev: FeFunction, eta_elem: Optional[np.ndarray],
                     tol: Tolerances, cfg: ControllerConfig):
    """Try the guarded sibling merge. Returns (mesh, removed, rolled_back)."""
    if eta_elem is None or eta_elem.size != mesh.num_elements:
        return mesh, 0, False
    marked = mark_for_coarsening(eta_elem, cfg.coarsen_factor)
    if marked.size == 0:
        return mesh, 0, False
    result = coarsen(mesh, marked)
    removed = len(result.removed_nodes)
    if removed == 0:
        return mesh, 0, False
    projected = l2_project(u_prev, result.mesh)
    if l2_diff(projected, u_prev) <= tol.eps0:
        return result.mesh, removed, False
    return mesh, 0, True


def run(problem: ProblemSpec, tolerances: Tolerances, config: ControllerConfig,
        mesh0: Optional[Mesh] = None,
        progress: Optional[Callable[[StepRecord], None]] = None) -> RunResult:
    """Advance the adaptive scheme from 0 to t_final (or to step underflow).

    mesh0 defaults to the datum-driven initial mesh. A supplied mesh that
    cannot hold the datum within eps0 raises InitialDatumError.
    """
    tol, cfg = tolerances, config
    if mesh0 is None:
        mesh = initial_mesh(problem, tol.eps0)
    else:
        mesh = mesh0
    u_prev = l2_project(problem.g, mesh)
    eta0 = l2_error_callable(problem.g, u_prev)
    if eta0 > tol.eps0:
        raise InitialDatumError(
            f"initial projection error {eta0:.3e} exceeds eps0 {tol.eps0:g}; "
            "refine the initial mesh")

    ledger = ErrorLedger(eta0=eta0)
    t_final = cfg.t_final
    budget_sq = tol.local_sum_sq()

    records: list[StepRecord] = []
    trajectory = [(0.0, mesh.nodes.copy(), u_prev.values.copy())]
    prev_eta_elem: Optional[np.ndarray] = None
    t = 0.0
    k_carry = cfg.k0
    termination = "final-time"
    total_newton = 0
    total_refinements = 0
    rollbacks = 0

    while t < t_final:
        index = len(records) + 1
        step_clock = time.perf_counter()
        k = min(k_carry, t_final - t)

        mesh, removed, rolled_back = _coarsening_pass(
            mesh, u_prev, prev_eta_elem, tol, cfg)
        if rolled_back:
            rollbacks += 1
        base_mesh = mesh
        if mesh is u_prev.mesh:
            base_guess = u_prev
        else:
            base_guess = l2_project(u_prev, mesh)

        u_lin = base_guess
        advance_count = 0    # Newton iterations at the current step size
        refine_count = 0     # refinement passes at the current step size
        shrinks = 0
        step_newton = 0      # linearized solves spent on the step, all sizes
        accepted: Optional[IndicatorSet] = None
        u_next: Optional[FeFunction] = None

        while accepted is None:
            state = NewtonState(iteration=advance_count, u_lin=u_lin,
                                u_prev=u_prev, k=k, t_n=t + k)
            solve_failed = False
            try:
                candidate, delta = newton_step(state, problem)
                ind = indicator_set(candidate, delta, u_lin, u_prev,
                                    k, t + k, t, problem)
            except (NonSolvableLinearization, NonlinearityEvaluationError):
                solve_failed = True
            step_newton += 1
            total_newton += 1

            if not solve_failed:
                eta_sq = ind.eta_sq_total
                theta_sq = ind.theta_sq_total
                upsilon_sq = ind.upsilon_sq_total
                if eta_sq + theta_sq + upsilon_sq <= budget_sq:
                    accepted = ind
                    u_next = candidate
                    break
                if theta_sq + upsilon_sq < eta_sq:
                    # space dominates: refine and redo this linearized solve
                    # with the same linearization point, transferred exactly
                    if refine_count >= cfg.max_refinements:
                        raise SafetyValveExceeded(
                            f"step {index}: {cfg.max_refinements} refinement "
                            f"passes without a certificate at k = {k:.3e}")
                    marked = mark_for_refinement(ind.eta_sq, cfg.theta_mark)
                    mesh, inherit = refine(mesh, marked)
                    u_lin = transfer_refined(u_lin, mesh, inherit)
                    refine_count += 1
                    total_refinements += 1
                    continue
                if upsilon_sq >= theta_sq:
                    # linearization dominates: iterate Newton
                    if advance_count + 1 >= cfg.max_newton:
                        raise SafetyValveExceeded(
                            f"step {index}: {cfg.max_newton} Newton iterations "
                            f"without a certificate at k = {k:.3e}")
                    u_lin = candidate
                    advance_count += 1
                    continue

            # time error dominates (or the solve broke down): shrink k and
            # restart from the post-coarsening state
            k_new = cfg.sigma * k
            if k_new < cfg.k_min:
                termination = "step-underflow"
                break
            k = k_new
            shrinks += 1
            mesh = base_mesh
            u_lin = base_guess
            advance_count = 0
            refine_count = 0

        if accepted is None:
            break

        t_next = t + k
        if abs(t_final - t_next) <= _SNAP_REL * t_final:
            t_next = t_final
        accumulate(ledger, accepted)
        record = StepRecord(
            index=index, t=t_next, k=k,
            newton_iters=step_newton, refinements=refine_count,
            shrinks=shrinks, n_elements=mesh.num_elements,
            coarsened=removed, rollback=rolled_back,
            eta_sq=accepted.eta_sq_total, theta_sq=accepted.theta_sq_total,
            upsilon_sq=accepted.upsilon_sq_total,
            bound_sq=ledger.bound_sq,
            wall_time=time.perf_counter() - step_clock,
        )
        records.append(record)
        trajectory.append((t_next, mesh.nodes.copy(), u_next.values.copy()))
        prev_eta_elem = np.sqrt(accepted.eta_sq)
        u_prev = u_next
        t = t_next
        k_carry = cfg.kappa * k
        if progress is not None:
            progress(record)

    return RunResult(
        problem=problem, tolerances=tol, config=cfg, eta0=eta0,
        steps=records, ledger=ledger, termination=termination,
        mesh=mesh, u=u_prev, trajectory=trajectory,
        total_newton=total_newton, total_refinements=total_refinements,
        coarsen_rollbacks=rollbacks,
    )
