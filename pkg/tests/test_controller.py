"""Driver behavior: certificates, branching, coarsening guard, underflow."""

import dataclasses

import numpy as np
import pytest

from ngadapt.controller import (
    ControllerConfig,
    RunResult,
    Tolerances,
    _coarsening_pass,
    initial_mesh,
    mark_for_coarsening,
    mark_for_refinement,
    run,
)
from ngadapt.errors import InitialDatumError, SafetyValveExceeded
from ngadapt.fem import fe_interpolate, l2_error_callable, l2_project
from ngadapt.mesh import refine, uniform_mesh
from ngadapt.problems import ProblemSpec, make_problem


def heat_zero(eps=0.05):
    zero = lambda u, x, t: np.zeros_like(u)
    return ProblemSpec(
        name="heat-zero", eps=eps, domain=(0.0, 1.0), t_final=1.0,
        f=zero, dfu=zero, g=lambda x: np.zeros_like(x),
    )


def test_tolerances_arithmetic():
    tol = Tolerances.uniform(1e-3)
    assert tol.local_sum_sq() == pytest.approx(3e-6)
    assert tol.total_bound(4.0) == pytest.approx(np.sqrt(1e-6 + 4.0 * 3e-6))
    split = Tolerances.from_total(1e-3, 2e-3, 2e-3, 2e-3, t_final=4.0)
    assert split.eta == pytest.approx(1e-3)
    with pytest.raises(ValueError):
        Tolerances(0.0, 1.0, 1.0, 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(t_final=1.0, k0=2.0)
    with pytest.raises(ValueError):
        ControllerConfig(t_final=1.0, k0=0.1, sigma=1.0)
    with pytest.raises(ValueError):
        ControllerConfig(t_final=1.0, k0=0.1, kappa=0.5)
    with pytest.raises(ValueError):
        ControllerConfig(t_final=1.0, k0=0.1, k_min=0.5)


def test_refinement_marking_is_maximum_strategy():
    # cutoff sits on the squared scale: eta_K^2 >= theta * max eta_K^2
    eta_sq = np.array([1.0, 4.0, 0.25, 4.0])
    assert mark_for_refinement(eta_sq, 0.5).tolist() == [1, 3]
    assert mark_for_refinement(eta_sq, 0.25).tolist() == [0, 1, 3]
    assert mark_for_refinement(eta_sq, 1.0).tolist() == [1, 3]
    assert mark_for_refinement(np.empty(0), 0.5).size == 0


def test_coarsening_marking_uses_mean():
    eta = np.array([1.0, 1.0, 1.0, 0.05])
    assert mark_for_coarsening(eta, 0.1).tolist() == [3]
    # uniform indicators never fall below a fraction of their own mean
    assert mark_for_coarsening(np.full(8, 1e-6), 0.1).size == 0
    assert mark_for_coarsening(eta, 0.0).size == 0


def test_zero_dynamics_accepts_every_step_and_grows_k():
    result = run(heat_zero(), Tolerances.uniform(1e-3),
                 ControllerConfig(t_final=1.0, k0=0.1),
                 mesh0=uniform_mesh(0.0, 1.0, 8))
    assert result.termination == "final-time"
    assert result.t_end == 1.0
    # k doubles after each accepted step: 0.1, 0.2, 0.4, then the remainder
    assert [s.k for s in result.steps] == pytest.approx([0.1, 0.2, 0.4, 0.3])
    assert all(s.newton_iters == 1 for s in result.steps)
    assert result.ledger.bound_sq == 0.0
    assert result.eta0 == 0.0
    assert len(result.trajectory) == 5
    assert np.max(np.abs(result.u.values)) == 0.0


def test_small_run_certifies_every_step():
    problem = make_problem("linear_exp_source", eps=0.1)
    tol = Tolerances.uniform(2e-2)
    cfg = ControllerConfig(t_final=1.0, k0=0.1)
    result = run(problem, tol, cfg)
    assert result.termination == "final-time"
    assert result.t_end == 1.0
    assert len(result.steps) > 5
    for s in result.steps:
        assert s.eta_sq + s.theta_sq + s.upsilon_sq <= tol.local_sum_sq()
    assert result.bound_sqrt <= tol.total_bound(1.0) * (1.0 + 1e-12)
    ts = [s.t for s in result.steps]
    assert all(b > a for a, b in zip(ts, ts[1:]))
    hist = result.ledger.bound_sq_history()
    assert np.all(np.diff(hist) >= 0.0)
    # the certified ceiling really contains the final-time error
    err = l2_error_callable(lambda x: problem.exact.u(x, 1.0), result.u)
    assert err <= 10.0 * result.bound_sqrt


def test_runs_are_deterministic():
    problem = make_problem("linear_exp_source", eps=0.1)
    tol = Tolerances.uniform(5e-2)
    cfg = ControllerConfig(t_final=0.5, k0=0.1)
    a = run(problem, tol, cfg)
    b = run(problem, tol, cfg)
    # everything except the wall clock must match bit for bit
    strip = [dataclasses.replace(s, wall_time=0.0) for s in a.steps]
    assert strip == [dataclasses.replace(s, wall_time=0.0) for s in b.steps]
    assert np.array_equal(a.u.values, b.u.values)
    assert np.array_equal(a.mesh.nodes, b.mesh.nodes)


def test_initial_mesh_resolves_layer_datum():
    problem = make_problem("linear_exp_source", eps=1e-3)
    mesh = initial_mesh(problem, eps0=1e-3)
    u0 = l2_project(problem.g, mesh)
    assert l2_error_callable(problem.g, u0) <= 1e-3
    # rebased: no refinement history survives
    assert np.all(mesh.levels == 0)
    # graded toward the endpoints where the layers sit
    h = mesh.lengths
    assert min(h[0], h[-1]) < 0.2 * h.max()


def test_infeasible_datum_mesh_raises():
    problem = make_problem("linear_exp_source", eps=1e-3)
    with pytest.raises(InitialDatumError):
        run(problem, Tolerances.uniform(1e-3),
            ControllerConfig(t_final=1.0, k0=0.1),
            mesh0=uniform_mesh(0.0, 1.0, 4))


def test_coarsening_guard_rolls_back():
    base = uniform_mesh(0.0, 1.0, 8)
    fine, _ = refine(base, np.arange(8))
    u_prev = fe_interpolate(fine, lambda x: np.sin(np.pi * x))
    eta = np.ones(16)
    eta[14:] = 1e-3  # a sibling pair far below the mean
    cfg = ControllerConfig(t_final=1.0, k0=0.1)

    strict = Tolerances(1e-9, 1.0, 1.0, 1.0)
    mesh, removed, rolled_back = _coarsening_pass(fine, u_prev, eta, strict, cfg)
    assert rolled_back and removed == 0 and mesh is fine

    loose = Tolerances(0.5, 1.0, 1.0, 1.0)
    mesh, removed, rolled_back = _coarsening_pass(fine, u_prev, eta, loose, cfg)
    assert not rolled_back and removed == 1
    assert mesh.num_elements == 15


def test_stale_indicators_skip_coarsening():
    mesh = uniform_mesh(0.0, 1.0, 8)
    u_prev = fe_interpolate(mesh, lambda x: x * (1 - x))
    cfg = ControllerConfig(t_final=1.0, k0=0.1)
    out, removed, rb = _coarsening_pass(mesh, u_prev, np.ones(5),
                                        Tolerances.uniform(1.0), cfg)
    assert out is mesh and removed == 0 and not rb


def test_untouchable_tolerance_underflows():
    # pooled budget of 3e-18 on a mesh fine enough that the time error
    # dominates: the only move is shrinking k, which hits the floor at once
    problem = make_problem("linear_exp_source", eps=0.1)
    tol = Tolerances(0.5, 1e-9, 1e-9, 1e-9)
    cfg = ControllerConfig(t_final=1.0, k0=0.1, k_min=0.09)
    mesh0 = uniform_mesh(0.0, 1.0, 256)
    result = run(problem, tol, cfg, mesh0=mesh0)
    assert result.termination == "step-underflow"
    assert result.steps == []
    assert result.t_end == 0.0


def test_refinement_valve_trips():
    problem = make_problem("linear_exp_source", eps=0.1)
    # tiny k keeps the time terms negligible, so the coarse-mesh eta
    # dominates and the controller keeps refining until the valve trips
    tol = Tolerances(0.5, 1e-9, 1e-9, 1e-9)
    cfg = ControllerConfig(t_final=1.0, k0=1e-4, max_refinements=2)
    with pytest.raises(SafetyValveExceeded):
        run(problem, tol, cfg, mesh0=uniform_mesh(0.0, 1.0, 8))


def test_blowup_run_ends_in_underflow_before_final_time():
    problem = make_problem("power_blowup", eps=1e-3)
    tol = Tolerances.uniform(5e-2)
    cfg = ControllerConfig(t_final=0.1, k0=1e-3, k_min=1e-5)
    result = run(problem, tol, cfg)
    assert result.termination == "step-underflow"
    # the reaction u^4 with peak 2 cannot be stepped past the ODE blow-up
    # time 1/24; the controller stalls short of it and gives up
    assert 0.01 <= result.t_end <= 0.095
    assert np.max(result.u.values) > 2.5
    for s in result.steps:
        assert s.eta_sq + s.theta_sq + s.upsilon_sq <= tol.local_sum_sq()
    ks = np.array([s.k for s in result.steps])
    # the run stalls with the accepted step size pinned near the floor
    assert ks[-1] < 0.25 * ks.max()
    assert ks[-1] < 4.0 * cfg.k_min
