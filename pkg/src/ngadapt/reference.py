"""Independent reference solutions and true-error measurement.

Two oracles cross-check the adaptive solver without sharing its code:

reference_solve  brute-force backward Euler with full Newton on a fixed
                 uniform grid, assembled locally in LAPACK banded storage and
                 solved with scipy. Reaction integrals use a 2-point Gauss
                 rule, a deliberately different choice from the main path.
fourier_exact    sine-series solution of the linear problem with source
                 exp(t) and the boundary-layer datum. Since the datum solves
                 -eps g'' + g = 1, its sine coefficients are the coefficients
                 of 1 divided by (1 + eps lambda_k), and each mode evolves by
                 a scalar linear ODE.

true_error integrates the distance between a piecewise-linear-in-time
trajectory and a reference over space and time: the squared energy-norm error
(L2 in time, Gauss-3 per step) plus the squared maximal L2 error over sampled
times. efficiency_index divides the solver's certificate by that sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import NgAdaptError, NonlinearityEvaluationError
from .problems import ProblemSpec

# 2-point Gauss rule on [-1, 1]
_G2 = np.array([-1.0, 1.0]) / np.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Backward-Euler trajectory on a fixed uniform grid."""

    times: np.ndarray    # (M + 1,)
    nodes: np.ndarray    # (m + 1,)
    values: np.ndarray   # (M + 1, m + 1)

    def triples(self) -> list[tuple[float, np.ndarray, np.ndarray]]:
        """The trajectory as (t, nodes, values) snapshots."""
        return [(float(t), self.nodes, self.values[i])
                for i, t in enumerate(self.times)]


class TrajectoryInterpolant:
    """Evaluate a trajectory as a function of (x, t), linear in both."""

    def __init__(self, traj: Trajectory):
        self._t = traj.times
        self._x = traj.nodes
        self._v = traj.values

    def _frame(self, t: float) -> np.ndarray:
        i = int(np.searchsorted(self._t, t, side="right")) - 1
        i = min(max(i, 0), self._t.size - 2)
        w = (t - self._t[i]) / (self._t[i + 1] - self._t[i])
        w = min(max(w, 0.0), 1.0)
        return (1.0 - w) * self._v[i] + w * self._v[i + 1]

    def u(self, x: np.ndarray, t: float) -> np.ndarray:
        return np.interp(x, self._x, self._frame(t))

    def ux(self, x: np.ndarray, t: float) -> np.ndarray:
        frame = self._frame(t)
        slopes = np.diff(frame) / np.diff(self._x)
        idx = np.clip(np.searchsorted(self._x, x, side="right") - 1, 0, slopes.size - 1)
        return slopes[idx]


class VaryingMeshInterpolant:
    """Like TrajectoryInterpolant, but each frame has its own node set.

    Values and slopes are interpolated per frame and then blended linearly
    in time, matching how trajectories are integrated against an oracle, so
    comparing a trajectory against itself gives exactly zero.
    """

    def __init__(self, triples: Sequence[tuple[float, np.ndarray, np.ndarray]]):
        if len(triples) < 2:
            raise ValueError("need at least two frames")
        self._triples = list(triples)
        self._t = np.array([t for t, _, _ in triples])

    def _bracket(self, t: float):
        i = int(np.searchsorted(self._t, t, side="right")) - 1
        i = min(max(i, 0), self._t.size - 2)
        w = (t - self._t[i]) / (self._t[i + 1] - self._t[i])
        return i, min(max(w, 0.0), 1.0)

    def u(self, x: np.ndarray, t: float) -> np.ndarray:
        i, w = self._bracket(t)
        _, xa, va = self._triples[i]
        _, xb, vb = self._triples[i + 1]
        return (1.0 - w) * np.interp(x, xa, va) + w * np.interp(x, xb, vb)

    def ux(self, x: np.ndarray, t: float) -> np.ndarray:
        i, w = self._bracket(t)
        _, xa, va = self._triples[i]
        _, xb, vb = self._triples[i + 1]
        return (1.0 - w) * _slopes_at(xa, va, x) + w * _slopes_at(xb, vb, x)


def _gauss2_batch(problem_fn, u_vals, x_l, x_r, t):
    """Per-element 2-point Gauss integrals of f(u(x), x, t) times both hats.

    u_vals holds nodal values; u is linear per element. Returns the two
    contribution arrays (to left node, to right node).
    """
    h = x_r - x_l
    mid = 0.5 * (x_l + x_r)
    half = 0.5 * h
    acc_l = np.zeros_like(h)
    acc_r = np.zeros_like(h)
    ul = u_vals[:-1]
    ur = u_vals[1:]
    for gp in _G2:
        x = mid + half * gp
        phi_r = (x - x_l) / h
        phi_l = 1.0 - phi_r
        uq = ul * phi_l + ur * phi_r
        fq = problem_fn(uq, x, t)
        acc_l += half * fq * phi_l
        acc_r += half * fq * phi_r
    return acc_l, acc_r


def _load(problem_fn, u_vals, x, t):
    """Interior load vector of f(u, x, t) on the uniform grid x."""
    acc_l, acc_r = _gauss2_batch(problem_fn, u_vals, x[:-1], x[1:], t)
    b = np.zeros(x.size)
    b[:-1] += acc_l
    b[1:] += acc_r
    return b[1:-1]


def _weighted_mass_ab(problem_fn, u_vals, x, t):
    """Banded (ab-format) matrix of int w phi_i phi_j with w = f(u, x, t)."""
    x_l, x_r = x[:-1], x[1:]
    h = x_r - x_l
    mid = 0.5 * (x_l + x_r)
    half = 0.5 * h
    a_ll = np.zeros_like(h)
    a_lr = np.zeros_like(h)
    a_rr = np.zeros_like(h)
    ul = u_vals[:-1]
    ur = u_vals[1:]
    for gp in _G2:
        xq = mid + half * gp
        phi_r = (xq - x_l) / h
        phi_l = 1.0 - phi_r
        wq = problem_fn(ul * phi_l + ur * phi_r, xq, t) * half
        a_ll += wq * phi_l * phi_l
        a_lr += wq * phi_l * phi_r
        a_rr += wq * phi_r * phi_r
    n = x.size - 2
    ab = np.zeros((3, n))
    diag = np.zeros(x.size)
    diag[:-1] += a_ll
    diag[1:] += a_rr
    ab[1] = diag[1:-1]
    ab[0, 1:] = a_lr[1:-1]
    ab[2, :-1] = a_lr[1:-1]
    return ab


def _project_datum(g, x):
    """L2 projection of the datum onto the zero-trace hats of the grid x."""
    m = x.size - 1
    h = (x[-1] - x[0]) / m
    n = m - 1
    ab = np.zeros((3, n))
    ab[1] = 2.0 * h / 3.0
    ab[0, 1:] = h / 6.0
    ab[2, :-1] = h / 6.0
    # composite 2-point Gauss with 8 panels per element
    b = np.zeros(x.size)
    for panel in range(8):
        lo = x[:-1] + np.diff(x) * panel / 8.0
        hi = x[:-1] + np.diff(x) * (panel + 1) / 8.0
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        for gp in _G2:
            xq = mid + half * gp
            phi_r = (xq - x[:-1]) / np.diff(x)
            gq = g(xq) * half
            b[:-1] += gq * (1.0 - phi_r)
            b[1:] += gq * phi_r
    vals = np.zeros(x.size)
    vals[1:-1] = solve_banded((1, 1), ab, b[1:-1])
    return vals


def reference_solve(problem: ProblemSpec, m_elements: int, m_steps: int,
                    newton_tol: float = 1e-10, max_newton: int = 200) -> Trajectory:
    """Uniform-grid, uniform-step backward Euler with full Newton.

    Written independently of the adaptive path; serves as its cross-check.
    """
    a, b_dom = problem.domain
    x = np.linspace(a, b_dom, m_elements + 1)
    h = (b_dom - a) / m_elements
    k = problem.t_final / m_steps
    n = m_elements - 1
    eps = problem.eps

    mass_ab = np.zeros((3, n))
    mass_ab[1] = 2.0 * h / 3.0
    mass_ab[0, 1:] = h / 6.0
    mass_ab[2, :-1] = h / 6.0
    stiff_ab = np.zeros((3, n))
    stiff_ab[1] = 2.0 / h
    stiff_ab[0, 1:] = -1.0 / h
    stiff_ab[2, :-1] = -1.0 / h

    def mass_vec(v):
        y = mass_ab[1] * v
        y[:-1] += mass_ab[0, 1:] * v[1:]
        y[1:] += mass_ab[2, :-1] * v[:-1]
        return y

    def stiff_vec(v):
        y = stiff_ab[1] * v
        y[:-1] += stiff_ab[0, 1:] * v[1:]
        y[1:] += stiff_ab[2, :-1] * v[:-1]
        return y

    vals = _project_datum(problem.g, x)
    times = np.linspace(0.0, problem.t_final, m_steps + 1)
    out = np.empty((m_steps + 1, x.size))
    out[0] = vals

    u = vals.copy()
    for step in range(1, m_steps + 1):
        t_n = times[step]
        m_prev = mass_vec(u[1:-1])
        w = u.copy()
        for it in range(max_newton):
            if not np.all(np.isfinite(w)):
                raise NonlinearityEvaluationError(
                    f"reference iterate blew up at t = {t_n:.6g}")
            b = _load(problem.f, w, x, t_n)
            resid = (mass_vec(w[1:-1]) - m_prev) / k + eps * stiff_vec(w[1:-1]) - b
            jac_ab = mass_ab / k + eps * stiff_ab - _weighted_mass_ab(problem.dfu, w, x, t_n)
            delta = solve_banded((1, 1), jac_ab, -resid)
            w[1:-1] += delta
            norm = np.sqrt(np.dot(delta, mass_vec(delta)))
            if norm <= newton_tol:
                break
        else:
            raise NgAdaptError(f"reference Newton stalled at t = {t_n:.6g}")
        u = w
        out[step] = u
    return Trajectory(times, x, out)


def fourier_modes_for_tail(eps: float, t: float, tail_tol: float = 1e-10,
                           cap: int = 1 << 22) -> int:
    """Smallest odd-mode count with absolute series tail below tail_tol.

    Each term is bounded by 2 exp(t) s_k / (1 + eps lambda_k); summing the
    bound over odd k > K gives about (2 exp(t) / pi) / (eps pi^2 K^2).
    """
    target = np.sqrt(2.0 * np.exp(t) / (np.pi ** 3 * eps * tail_tol))
    needed = int(np.ceil(target)) + 1
    if needed > cap:
        raise ValueError(
            f"series needs about {needed} modes for tail {tail_tol:g}; "
            "pass n_modes explicitly for this eps")
    return needed


def fourier_exact(eps: float, x: np.ndarray, t: float,
                  n_modes: Optional[int] = None, tail_tol: float = 1e-10) -> np.ndarray:
    """Series solution of u_t - eps u_xx = exp(t), u(., 0) = layer profile.

    With lambda_k = (k pi)^2 and s_k the sine coefficients of the constant 1
    (zero for even k, 4 / (k pi) for odd k), the datum has coefficients
    g_k = s_k / (1 + eps lambda_k) and each mode evolves as

        u_k(t) = g_k exp(-eps lambda_k t)
                 + s_k (exp(t) - exp(-eps lambda_k t)) / (1 + eps lambda_k).

    Even modes vanish and are skipped. n_modes defaults to the count that
    drives the absolute tail bound below tail_tol.
    """
    x = np.asarray(x, dtype=float)
    if n_modes is None:
        n_modes = fourier_modes_for_tail(eps, t, tail_tol)
    out = np.zeros_like(x)
    # chunk the odd modes so the (modes x points) work array stays small
    chunk = max(1, (1 << 22) // max(x.size, 1))
    k_start = 1
    while k_start <= n_modes:
        k_end = min(n_modes, k_start + 2 * chunk - 2)
        k = np.arange(k_start, k_end + 1, 2, dtype=float)
        lam = (k * np.pi) ** 2
        s_k = 4.0 / (k * np.pi)
        g_k = s_k / (1.0 + eps * lam)
        decay = np.exp(-eps * lam * t)
        coeff = g_k * decay + s_k * (np.exp(t) - decay) / (1.0 + eps * lam)
        out += np.sin(np.outer(x, k * np.pi)) @ coeff
        k_start = k_end + 2
    return out


class FourierOracle:
    """Series solution wrapped as a (u, ux) pair for error integration.

    The mode coefficients collapse: the datum coefficients are
    g_k = s_k / (1 + eps lambda_k), which cancels the transient term and
    leaves u_k(t) = s_k exp(t) / (1 + eps lambda_k). Time enters only as the
    scalar exp(t), so the spatial series is summed once per evaluation grid
    (memoized) and scaled. The differentiated series has a harmonic tail and
    is useless numerically; the slope is a central difference of the value
    series instead, with the stencil width balancing the eps^{-3/2} layer
    curvature against round-off.
    """

    def __init__(self, eps: float, tail_tol: float = 1e-8,
                 deriv_tol: float = 1e-7):
        self.eps = eps
        self.tail_tol = tail_tol
        self.step = float(np.sqrt(deriv_tol * eps ** 1.5 / 30.0))
        self.n_modes = fourier_modes_for_tail(eps, 0.0, tail_tol)
        self._memo: dict = {}

    def _profile(self, x: np.ndarray) -> np.ndarray:
        key = x.tobytes()
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        out = np.zeros_like(x)
        chunk = max(1, (1 << 22) // max(x.size, 1))
        k_start = 1
        while k_start <= self.n_modes:
            k_end = min(self.n_modes, k_start + 2 * chunk - 2)
            k = np.arange(k_start, k_end + 1, 2, dtype=float)
            s_k = 4.0 / (k * np.pi)
            coeff = s_k / (1.0 + self.eps * (k * np.pi) ** 2)
            out += np.sin(np.outer(x, k * np.pi)) @ coeff
            k_start = k_end + 2
        if len(self._memo) >= 8:
            self._memo.pop(next(iter(self._memo)))
        self._memo[key] = out
        return out

    def u(self, x: np.ndarray, t: float) -> np.ndarray:
        return np.exp(t) * self._profile(np.asarray(x, dtype=float))

    def ux(self, x: np.ndarray, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = self.step
        # the odd periodic extension keeps the series valid just outside [a,b]
        return np.exp(t) * (self._profile(x + h)
                            - self._profile(x - h)) / (2.0 * h)


def _gauss3_on(nodes: np.ndarray):
    """3-point Gauss points and weights per interval of a partition."""
    q = np.sqrt(0.6)
    gn = np.array([-q, 0.0, q])
    gw = np.array([5.0, 8.0, 5.0]) / 9.0
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    half = 0.5 * np.diff(nodes)
    pts = (mid[None, :] + half[None, :] * gn[:, None]).T.ravel()
    wts = (half[None, :] * gw[:, None]).T.ravel()
    return pts, wts


def _subdivide(nodes: np.ndarray, n_sub: int) -> np.ndarray:
    if n_sub <= 1:
        return nodes
    frac = np.arange(n_sub) / n_sub
    fine = nodes[:-1, None] + np.diff(nodes)[:, None] * frac[None, :]
    return np.append(fine.ravel(), nodes[-1])


def _slopes_at(nodes, vals, pts):
    slopes = np.diff(vals) / np.diff(nodes)
    idx = np.clip(np.searchsorted(nodes, pts, side="right") - 1, 0, slopes.size - 1)
    return slopes[idx]


def true_error_series(triples: Sequence[tuple[float, np.ndarray, np.ndarray]],
                      ref, eps: float, n_sub: int = 4):
    """Cumulative true-error pieces after each step of a trajectory.

    triples is the solver trajectory as (t, nodes, values), first entry at the
    initial time; ref provides u(x, t) and ux(x, t). Returns (step end times,
    cumulative squared energy-norm error integrated in time, running squared
    max of the L2 error over sampled times).
    """
    if len(triples) < 2:
        raise ValueError("need at least one step")
    tq, tw = np.polynomial.legendre.leggauss(3)
    t_ends = np.empty(len(triples) - 1)
    l2z_cum = np.empty(len(triples) - 1)
    linf_run = np.empty(len(triples) - 1)

    acc = 0.0
    run_max = 0.0

    t0, x0, v0 = triples[0]
    pts0, wts0 = _gauss3_on(_subdivide(x0, n_sub))
    d0 = ref.u(pts0, t0) - np.interp(pts0, x0, v0)
    run_max = max(run_max, float(np.sum(wts0 * d0 * d0)))

    for j in range(1, len(triples)):
        t_prev, x_prev, v_prev = triples[j - 1]
        t_next, x_next, v_next = triples[j]
        k = t_next - t_prev
        un = np.union1d(x_prev, x_next)
        pts, wts = _gauss3_on(_subdivide(un, n_sub))
        prev_v = np.interp(pts, x_prev, v_prev)
        next_v = np.interp(pts, x_next, v_next)
        prev_s = _slopes_at(x_prev, v_prev, pts)
        next_s = _slopes_at(x_next, v_next, pts)

        # energy-norm error, 3-point Gauss in time over the step
        for gq, gw in zip(tq, tw):
            tau = 0.5 * (t_prev + t_next) + 0.5 * k * gq
            blend = (tau - t_prev) / k
            ui = (1.0 - blend) * prev_v + blend * next_v
            ui_s = (1.0 - blend) * prev_s + blend * next_s
            du = ref.u(pts, float(tau)) - ui
            ds = ref.ux(pts, float(tau)) - ui_s
            acc += 0.5 * k * gw * float(np.sum(wts * (du * du + eps * ds * ds)))

        # max L2 error over interior samples and the step end; the weight is
        # recomputed from tau so a trajectory compared against itself (with
        # the same reconstruction) cancels exactly
        for blend in (0.25, 0.5, 0.75):
            tau = t_prev + blend * k
            w = (tau - t_prev) / k
            ui = (1.0 - w) * prev_v + w * next_v
            du = ref.u(pts, float(tau)) - ui
            run_max = max(run_max, float(np.sum(wts * du * du)))
        du = ref.u(pts, float(t_next)) - next_v
        run_max = max(run_max, float(np.sum(wts * du * du)))

        t_ends[j - 1] = t_next
        l2z_cum[j - 1] = acc
        linf_run[j - 1] = run_max
    return t_ends, l2z_cum, linf_run


def true_error(triples, ref, eps: float, t_end: Optional[float] = None):
    """Energy-norm-in-time and max-L2 errors (not squared) up to t_end."""
    t_ends, l2z, linf = true_error_series(triples, ref, eps)
    if t_end is None:
        i = len(t_ends) - 1
    else:
        i = int(np.searchsorted(t_ends, t_end * (1.0 + 1e-12), side="right")) - 1
        if i < 0:
            raise ValueError(f"trajectory has no step ending by t = {t_end}")
    return float(np.sqrt(l2z[i])), float(np.sqrt(linf[i]))


def efficiency_index(bound_sq: float, true_sq: float) -> Optional[float]:
    """Ratio of certified bound to true error, both on the squared scale.

    None when the true error is zero (the ratio is undefined there).
    """
    if true_sq == 0.0:
        return None
    return float(bound_sq / true_sq)
