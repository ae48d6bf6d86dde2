"""Linearized step solves: hand cases, a fixed-point oracle, Jacobian checks."""

import numpy as np
import pytest

from ngadapt import fem, newton
from ngadapt import mesh as msh
from ngadapt.errors import NonlinearityEvaluationError
from ngadapt.problems import ProblemSpec, linear_exp_source, quartic_absorption


def heat_only(eps):
    """f identically zero."""
    return ProblemSpec(
        name="heat",
        eps=eps,
        domain=(0.0, 1.0),
        t_final=1.0,
        f=lambda u, x, t: np.zeros_like(np.asarray(x, dtype=float)),
        dfu=lambda u, x, t: np.zeros_like(np.asarray(x, dtype=float)),
        g=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    )


def fe_hat(mesh, node, height=1.0):
    vals = np.zeros(mesh.num_nodes)
    vals[node] = height
    return fem.FeFunction(mesh, vals)


def test_single_interior_node_heat_step_by_hand():
    # one interior node: M = 1/3, A = 4; with eps = k = 0.1 the backward
    # Euler value is v / (1 + 12 eps k) = 25/28
    mesh = msh.uniform_mesh(0.0, 1.0, 2)
    u0 = fe_hat(mesh, 1)
    state = newton.NewtonState(0, u0, u0, k=0.1, t_n=0.1)
    u1, delta = newton.newton_step(state, heat_only(0.1))
    assert np.isclose(u1.values[1], 25.0 / 28.0, rtol=1e-14)
    assert np.isclose(delta.values[1], 25.0 / 28.0 - 1.0, rtol=1e-13)


def test_zero_consistency():
    mesh = msh.uniform_mesh(0.0, 1.0, 7)
    zero = fem.fe_zero(mesh)
    state = newton.NewtonState(0, zero, zero, k=0.2, t_n=0.2)
    u1, delta = newton.newton_step(state, heat_only(0.5))
    assert np.all(delta.values == 0.0)
    assert np.all(u1.values == 0.0)


def test_affine_problem_converges_in_one_step():
    # the reaction does not depend on u, so the first increment solves the
    # step exactly and the second increment is zero
    prob = linear_exp_source(1e-2)
    mesh = msh.uniform_mesh(0.0, 1.0, 32)
    u_prev = fem.l2_project(prob.g, mesh)
    state = newton.NewtonState(0, u_prev, u_prev, k=0.1, t_n=0.1)
    u1, _ = newton.newton_step(state, prob)
    state2 = newton.NewtonState(1, u1, u_prev, k=0.1, t_n=0.1)
    u2, delta2 = newton.newton_step(state2, prob)
    l2, _ = fem.norms(delta2, prob.eps)
    assert l2 <= 1e-12
    assert np.allclose(u2.values, u1.values, atol=1e-12)


def test_newton_agrees_with_picard_oracle():
    # fixed-point oracle: U_{j+1} solves (M/k + eps A) U = m(u_prev)/k + b(f(U_j))
    prob = quartic_absorption(0.1)
    mesh = msh.uniform_mesh(0.0, 1.0, 16)
    u_prev = fem.fe_interpolate(mesh, lambda x: 0.5 * np.sin(np.pi * x))
    k, t_n = 0.05, 0.3

    u = u_prev
    for it in range(60):
        state = newton.NewtonState(it, u, u_prev, k, t_n)
        u, delta = newton.newton_step(state, prob)
        if fem.norms(delta, prob.eps)[0] <= 1e-14:
            break
    assert it < 10

    mass = fem.assemble_mass(mesh)
    stiff = fem.assemble_stiffness(mesh)
    lhs = np.diag(mass.diag / k + prob.eps * stiff.diag)
    lhs += np.diag(mass.off / k + prob.eps * stiff.off, 1)
    lhs += np.diag(mass.off / k + prob.eps * stiff.off, -1)
    m_prev = fem.mass_load(u_prev, mesh)
    vals = u_prev.values.copy()
    for _ in range(400):
        uj = fem.FeFunction(mesh, vals)
        b = fem.assemble_load(mesh, lambda x: prob.f(uj(x), x, t_n))
        new_int = np.linalg.solve(lhs, m_prev / k + b)
        new = np.zeros(mesh.num_nodes)
        new[1:-1] = new_int
        if np.max(np.abs(new - vals)) <= 1e-14:
            vals = new
            break
        vals = new
    assert np.allclose(u.values, vals, atol=1e-10)


def test_discrete_residual_small_after_convergence():
    prob = quartic_absorption(0.05)
    mesh = msh.uniform_mesh(0.0, 1.0, 24)
    u_prev = fem.fe_interpolate(mesh, lambda x: x * (1.0 - x))
    k, t_n = 0.02, 0.4
    u = u_prev
    for it in range(30):
        state = newton.NewtonState(it, u, u_prev, k, t_n)
        u, delta = newton.newton_step(state, prob)
        if fem.norms(delta, prob.eps)[0] <= 1e-14:
            break
    res = newton.residual_map(u.interior, newton.NewtonState(0, u, u_prev, k, t_n), prob)
    scale = np.linalg.norm(fem.mass_load(u_prev, mesh)) / k
    assert np.linalg.norm(res) <= 1e-11 * scale


def test_jacobian_matches_finite_differences():
    prob = quartic_absorption(0.2)
    mesh = msh.uniform_mesh(0.0, 1.0, 6)
    rng = np.random.default_rng(3)
    vals = np.zeros(mesh.num_nodes)
    vals[1:-1] = rng.uniform(-0.5, 0.5, mesh.num_nodes - 2)
    u_lin = fem.FeFunction(mesh, vals)
    u_prev = fem.fe_interpolate(mesh, lambda x: 0.3 * np.sin(np.pi * x))
    state = newton.NewtonState(0, u_lin, u_prev, k=0.1, t_n=0.5)

    jac = newton.newton_matrix(state, prob).dense()
    n = jac.shape[0]
    fd = np.zeros_like(jac)
    h = 1e-7
    base = u_lin.interior.copy()
    for j in range(n):
        up = base.copy()
        dn = base.copy()
        up[j] += h
        dn[j] -= h
        fd[:, j] = (newton.residual_map(up, state, prob)
                    - newton.residual_map(dn, state, prob)) / (2.0 * h)
    assert np.allclose(jac, fd, rtol=1e-6, atol=1e-7)


def test_cross_mesh_previous_solution_integrated_exactly():
    # solving on a refined mesh with u_prev on the coarse mesh must equal
    # solving with the exactly transferred u_prev on the fine mesh
    prob = quartic_absorption(0.1)
    coarse = msh.uniform_mesh(0.0, 1.0, 8)
    u_prev = fem.fe_interpolate(coarse, lambda x: np.sin(np.pi * x))
    fine, inh = msh.refine(coarse, [2, 3, 4])
    u_prev_fine = fem.transfer_refined(u_prev, fine, inh)
    u_lin = fem.l2_project(u_prev, fine)

    ua, _ = newton.newton_step(newton.NewtonState(0, u_lin, u_prev, 0.05, 0.05), prob)
    ub, _ = newton.newton_step(newton.NewtonState(0, u_lin, u_prev_fine, 0.05, 0.05), prob)
    assert np.allclose(ua.values, ub.values, atol=1e-13)


def test_nonfinite_reaction_raises():
    bad = ProblemSpec(
        name="bad",
        eps=0.1,
        domain=(0.0, 1.0),
        t_final=1.0,
        f=lambda u, x, t: np.full_like(np.asarray(x, dtype=float), np.nan),
        dfu=lambda u, x, t: np.zeros_like(np.asarray(x, dtype=float)),
        g=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    )
    mesh = msh.uniform_mesh(0.0, 1.0, 4)
    zero = fem.fe_zero(mesh)
    with pytest.raises(NonlinearityEvaluationError):
        newton.newton_step(newton.NewtonState(0, zero, zero, 0.1, 0.1), bad)
