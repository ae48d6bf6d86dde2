"""Reference oracle checks: series vs closed form vs brute-force march.

The three ways of producing the linear-problem solution are written
independently (closed form attached to the problem, sine series, uniform
backward Euler), so mutual agreement here is a genuine cross-check.
"""

import numpy as np
import pytest

from ngadapt.problems import ProblemSpec, layer_profile, make_problem
from ngadapt.reference import (
    FourierOracle,
    Trajectory,
    TrajectoryInterpolant,
    efficiency_index,
    fourier_exact,
    fourier_modes_for_tail,
    reference_solve,
    true_error,
    true_error_series,
)


def heat_zero(eps=0.05, t_final=0.5):
    zero = lambda u, x, t: np.zeros_like(u)
    return ProblemSpec(
        name="heat-zero", eps=eps, domain=(0.0, 1.0), t_final=t_final,
        f=zero, dfu=zero, g=lambda x: np.zeros_like(x),
    )


def test_initial_frame_projects_datum():
    problem = make_problem("linear_exp_source", eps=0.1)
    traj = reference_solve(problem, m_elements=256, m_steps=4)
    g = layer_profile(0.1)
    x = np.linspace(0.0, 1.0, 2001)
    diff = np.interp(x, traj.nodes, traj.values[0]) - g(x)
    # L2 projection of a smooth datum on h = 1/256: error well under 1e-4
    assert np.sqrt(np.trapezoid(diff * diff, x)) < 1e-4
    assert traj.values[0][0] == 0.0 and traj.values[0][-1] == 0.0


def test_boundary_values_stay_zero():
    problem = make_problem("quartic_absorption", eps=1e-3, t_final=0.5)
    traj = reference_solve(problem, m_elements=128, m_steps=16)
    assert np.all(traj.values[:, 0] == 0.0)
    assert np.all(traj.values[:, -1] == 0.0)
    assert np.all(np.isfinite(traj.values))


def test_zero_data_give_zero_trajectory():
    traj = reference_solve(heat_zero(), m_elements=32, m_steps=8)
    assert np.max(np.abs(traj.values)) == 0.0


def test_march_approaches_closed_form():
    problem = make_problem("linear_exp_source", eps=0.1)
    traj = reference_solve(problem, m_elements=512, m_steps=512)
    exact = problem.exact.u(traj.nodes, 1.0)
    err = np.max(np.abs(traj.values[-1] - exact))
    assert err < 5e-3


def test_march_self_convergence_is_first_order():
    # the backward Euler time error dominates on these grids
    problem = make_problem("linear_exp_source", eps=0.1)
    x_probe = np.linspace(0.0, 1.0, 101)
    exact = problem.exact.u(x_probe, 1.0)

    def final_err(m, steps):
        traj = reference_solve(problem, m_elements=m, m_steps=steps)
        return np.max(np.abs(np.interp(x_probe, traj.nodes, traj.values[-1]) - exact))

    e1 = final_err(512, 64)
    e2 = final_err(512, 128)
    assert 1.6 < e1 / e2 < 2.4


def test_series_matches_closed_form():
    problem = make_problem("linear_exp_source", eps=0.1)
    x = np.linspace(0.0, 1.0, 201)
    for t in (0.0, 0.3, 1.0):
        series = fourier_exact(0.1, x, t)
        closed = problem.exact.u(x, t)
        assert np.max(np.abs(series - closed)) < 1e-8


def test_fourier_oracle_tracks_values_and_slopes():
    problem = make_problem("linear_exp_source", eps=0.1)
    orc = FourierOracle(0.1)
    x = np.linspace(0.0, 1.0, 201)
    for t in (0.0, 1.0):
        # value truncation rides the tail budget times exp(t)
        assert np.max(np.abs(orc.u(x, t) - problem.exact.u(x, t))) < 1e-7
        assert np.max(np.abs(orc.ux(x, t) - problem.exact.ux(x, t))) < 5e-3


def test_series_respects_explicit_mode_count():
    x = np.array([0.25, 0.5, 0.75])
    coarse = fourier_exact(0.1, x, 0.5, n_modes=31)
    fine = fourier_exact(0.1, x, 0.5, n_modes=100001)
    # truncation error shrinks with the mode count
    exact = make_problem("linear_exp_source", eps=0.1).exact.u(x, 0.5)
    assert np.max(np.abs(fine - exact)) < np.max(np.abs(coarse - exact))


def test_mode_count_cap_raises_for_tiny_eps():
    with pytest.raises(ValueError):
        fourier_modes_for_tail(1e-9, 1.0)


def test_series_agrees_with_march():
    problem = make_problem("linear_exp_source", eps=0.1)
    traj = reference_solve(problem, m_elements=1024, m_steps=1024)
    series = fourier_exact(0.1, traj.nodes, 1.0)
    assert np.max(np.abs(traj.values[-1] - series)) < 1e-2


def test_true_error_of_self_is_zero():
    problem = make_problem("quartic_absorption", eps=1e-2, t_final=0.5)
    traj = reference_solve(problem, m_elements=64, m_steps=8)
    ref = TrajectoryInterpolant(traj)
    l2z, linf = true_error(traj.triples(), ref, eps=1e-2)
    assert l2z < 1e-13
    assert linf < 1e-13
    assert efficiency_index(1.0, 0.0) is None
    assert efficiency_index(1.0, 4.0) == 0.25
    assert efficiency_index(4.0, 1.0) == 4.0


def test_true_error_matches_hand_interpolation_error():
    # u(x) = x(1 - x) frozen in time, interpolated on 4 elements:
    # per element the error is (x - x_l)(x_r - x), giving squared norms
    # h^4/30 (L2) and h^2/3 (gradient) summed over the unit interval.
    m, t_end, eps = 4, 0.7, 0.05
    h = 1.0 / m
    nodes = np.linspace(0.0, 1.0, m + 1)
    vals = nodes * (1.0 - nodes)

    class Ref:
        def u(self, x, t):
            return x * (1.0 - x)

        def ux(self, x, t):
            return 1.0 - 2.0 * x

    triples = [(0.0, nodes, vals), (t_end, nodes, vals)]
    l2z, linf = true_error(triples, Ref(), eps=eps)
    expect_l2z = np.sqrt(t_end * (h ** 4 / 30.0 + eps * h ** 2 / 3.0))
    expect_linf = np.sqrt(h ** 4 / 30.0)
    assert abs(l2z - expect_l2z) < 1e-12
    assert abs(linf - expect_linf) < 1e-12


def test_true_error_series_is_cumulative():
    problem = make_problem("linear_exp_source", eps=0.1)
    traj = reference_solve(problem, m_elements=64, m_steps=8)
    t_ends, l2z, linf = true_error_series(traj.triples(), problem.exact, eps=0.1)
    assert t_ends.shape == (8,)
    assert np.all(np.diff(l2z) > 0.0)
    assert np.all(np.diff(linf) >= 0.0)
    # truncating at an interior time matches the running value there
    l2z_mid, _ = true_error(traj.triples(), problem.exact, eps=0.1, t_end=float(t_ends[3]))
    assert abs(l2z_mid - np.sqrt(l2z[3])) < 1e-14


def test_trajectory_interpolant_blends_linearly():
    times = np.array([0.0, 1.0])
    nodes = np.array([0.0, 0.5, 1.0])
    values = np.array([[0.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    interp = TrajectoryInterpolant(Trajectory(times, nodes, values))
    assert interp.u(np.array([0.5]), 0.5)[0] == pytest.approx(1.0)
    assert interp.u(np.array([0.25]), 1.0)[0] == pytest.approx(1.0)
    assert interp.ux(np.array([0.25]), 0.5)[0] == pytest.approx(2.0)
    assert interp.ux(np.array([0.75]), 0.5)[0] == pytest.approx(-2.0)
