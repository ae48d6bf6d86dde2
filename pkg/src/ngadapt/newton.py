"""One Newton step of the implicit Euler equation.

Each time step solves, for the increment delta in the zero-trace space,

    int v (u_N + delta - u_prev) / k + eps grad(u_N + delta) . grad v
        = int (f(u_N) + f_u(u_N) delta) v      for all test hats v,

with the reaction term frozen at the step's end time t_n. In matrix form

    (M / k + eps A - R) delta = -M u_N / k + m(u_prev) / k - eps A u_N + b,

where M and A are mass and stiffness, R is the mass matrix weighted with
f_u(u_N, x, t_n), b is the load of f(u_N, x, t_n), and m(u_prev) is the load
of the previous solution, integrated exactly even when u_prev lives on a
different mesh. The next iterate is u_N + delta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .errors import NonlinearityEvaluationError
from .fem import BandedSystem, FeFunction, TridiagonalMatrix


@dataclass(frozen=True)
class NewtonState:
    """Inputs of one linearized solve within a time step.

    iteration : index N of the linearization point
    u_lin     : current linearization point u_N on the step's mesh
    u_prev    : accepted solution of the previous step (its own mesh)
    k         : step size
    t_n       : end time of the step; the reaction term is frozen here
    """

    iteration: int
    u_lin: FeFunction
    u_prev: FeFunction
    k: float
    t_n: float


def _checked(name: str, values: np.ndarray, t: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NonlinearityEvaluationError(f"{name} produced a non-finite value at t = {t:.6g}")
    return values


def assemble_newton_system(state: NewtonState, problem) -> BandedSystem:
    """Banded system for the Newton increment of the given state."""
    mesh = state.u_lin.mesh
    k = state.k
    t = state.t_n
    u_lin = state.u_lin

    mass = fem.assemble_mass(mesh)
    stiff = fem.assemble_stiffness(mesh)
    pts, wts = fem.element_gauss(mesh)
    uq = u_lin(pts)
    fq = _checked("f", problem.f(uq, pts, t), t)
    dfq = _checked("f_u", problem.dfu(uq, pts, t), t)
    reaction, load = fem.weighted_mass_and_load(mesh, pts, wts, dfq, fq)
    matrix = mass.scaled(1.0 / k) + stiff.scaled(problem.eps) - reaction

    prev_load = fem.mass_load(state.u_prev, mesh)
    u_int = u_lin.interior
    rhs = (prev_load - mass.matvec(u_int)) / k - problem.eps * stiff.matvec(u_int) + load
    return BandedSystem(matrix, rhs)


def solve_banded(system: BandedSystem) -> np.ndarray:
    """Direct elimination; raises NonSolvableLinearization on pivot breakdown."""
    return fem.solve_tridiagonal(system.matrix, system.rhs)


def newton_step(state: NewtonState, problem) -> tuple[FeFunction, FeFunction]:
    """Solve one linearization and return (next iterate, increment)."""
    mesh = state.u_lin.mesh
    system = assemble_newton_system(state, problem)
    delta_int = solve_banded(system)
    delta_vals = np.zeros(mesh.num_nodes)
    delta_vals[1:-1] = delta_int
    delta = FeFunction(mesh, delta_vals)
    u_next = FeFunction(mesh, state.u_lin.values + delta_vals)
    return u_next, delta


def residual_map(u_values_int: np.ndarray, state: NewtonState, problem) -> np.ndarray:
    """Discrete residual G(U) whose root is the exact backward-Euler solution.

    G(U) = M U / k - m(u_prev) / k + eps A U - b(f(U)). The Jacobian of G at
    u_lin is the Newton matrix; used by tests to check the linearization.
    """
    mesh = state.u_lin.mesh
    vals = np.zeros(mesh.num_nodes)
    vals[1:-1] = u_values_int
    u = FeFunction(mesh, vals)
    mass = fem.assemble_mass(mesh)
    stiff = fem.assemble_stiffness(mesh)
    load = fem.assemble_load(mesh, lambda x: problem.f(u(x), x, state.t_n))
    prev_load = fem.mass_load(state.u_prev, mesh)
    return (mass.matvec(u.interior) - prev_load) / state.k \
        + problem.eps * stiff.matvec(u.interior) - load


def newton_matrix(state: NewtonState, problem) -> TridiagonalMatrix:
    """Jacobian of the discrete residual map at the linearization point."""
    return assemble_newton_system(state, problem).matrix
