"""Piecewise-linear finite elements on 1d meshes.

Trial and test space is the span of the nodal hat functions that vanish at
both domain endpoints. Mass and stiffness matrices are assembled in closed
form; integrals that involve data or nonlinear terms use a 3-point Gauss rule
per element (exact through degree five). Products of functions living on two
different meshes are integrated exactly on the union partition, the mesh whose
nodes are the union of both node sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.linalg import solve_banded as scipy_solve_banded

from .errors import NonSolvableLinearization
from .mesh import Mesh, NodeInheritance

# 3-point Gauss-Legendre rule on [-1, 1], exact through degree 5.
GAUSS3_NODES = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
GAUSS3_WEIGHTS = np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])


@dataclass(frozen=True, eq=False)
class FeFunction:
    """Piecewise-linear function given by nodal values on a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.mesh.num_nodes,):
            raise ValueError("need one value per mesh node")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.interp(x, self.mesh.nodes, self.values)

    @property
    def slopes(self) -> np.ndarray:
        """Gradient per element (piecewise constant)."""
        return np.diff(self.values) / self.mesh.lengths

    def slope_at(self, x: np.ndarray) -> np.ndarray:
        """Gradient at the given points (element of the containing interval)."""
        return self.slopes[self.mesh.element_of(x)]

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]


def fe_zero(mesh: Mesh) -> FeFunction:
    return FeFunction(mesh, np.zeros(mesh.num_nodes))


def fe_interpolate(mesh: Mesh, fn: Callable[[np.ndarray], np.ndarray]) -> FeFunction:
    """Nodal interpolant of a callable."""
    return FeFunction(mesh, np.asarray(fn(mesh.nodes), dtype=float))


def transfer_refined(u: FeFunction, refined: Mesh, inheritance: NodeInheritance) -> FeFunction:
    """Exact transfer onto a refinement produced by refine()."""
    return FeFunction(refined, inheritance.apply(u.values))


@dataclass(frozen=True, eq=False)
class TridiagonalMatrix:
    """Symmetric tridiagonal matrix stored as main diagonal plus off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        e = np.asarray(self.off, dtype=float)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "off", e)
        if d.ndim != 1 or d.size < 1 or e.shape != (d.size - 1,):
            raise ValueError("inconsistent tridiagonal storage")

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.off * x[1:]
        y[1:] += self.off * x[:-1]
        return y

    def dense(self) -> np.ndarray:
        a = np.diag(self.diag)
        a += np.diag(self.off, 1) + np.diag(self.off, -1)
        return a

    def norm_inf(self) -> float:
        rows = np.abs(self.diag).copy()
        rows[:-1] += np.abs(self.off)
        rows[1:] += np.abs(self.off)
        return float(rows.max()) if rows.size else 0.0

    def __add__(self, other: "TridiagonalMatrix") -> "TridiagonalMatrix":
        return TridiagonalMatrix(self.diag + other.diag, self.off + other.off)

    def __sub__(self, other: "TridiagonalMatrix") -> "TridiagonalMatrix":
        return TridiagonalMatrix(self.diag - other.diag, self.off - other.off)

    def scaled(self, c: float) -> "TridiagonalMatrix":
        return TridiagonalMatrix(c * self.diag, c * self.off)


@dataclass(frozen=True, eq=False)
class BandedSystem:
    """A tridiagonal matrix paired with a right-hand side."""

    matrix: TridiagonalMatrix
    rhs: np.ndarray


# breakdown threshold for elimination pivots, relative to the matrix norm
PIVOT_RTOL = 1e-14


def _eliminate(matrix: TridiagonalMatrix, rhs: np.ndarray) -> np.ndarray:
    """Pivot-checked sequential elimination; the slow, diagnosing path."""
    n = matrix.n
    floor = PIVOT_RTOL * matrix.norm_inf()
    d = matrix.diag.tolist()
    e = matrix.off.tolist()
    y = rhs.tolist()
    for i in range(1, n):
        piv = d[i - 1]
        if abs(piv) < floor:
            raise NonSolvableLinearization(f"elimination pivot {piv:.3e} at row {i - 1}")
        w = e[i - 1] / piv
        d[i] -= w * e[i - 1]
        y[i] -= w * y[i - 1]
    if abs(d[n - 1]) < floor:
        raise NonSolvableLinearization(f"elimination pivot {d[n - 1]:.3e} at row {n - 1}")
    x = [0.0] * n
    x[n - 1] = y[n - 1] / d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (y[i] - e[i] * x[i + 1]) / d[i]
    return np.asarray(x)


def solve_tridiagonal(matrix: TridiagonalMatrix, rhs: np.ndarray) -> np.ndarray:
    """Direct solve of a symmetric tridiagonal system.

    No definiteness is assumed. The banded LAPACK solve is tried first; if it
    reports singularity or leaves a bad residual, the sequential elimination
    reruns the system and raises NonSolvableLinearization at the offending
    pivot (smaller than PIVOT_RTOL times the infinity norm of the matrix).
    """
    n = matrix.n
    b = np.asarray(rhs, dtype=float)
    if b.shape != (n,):
        raise ValueError("right-hand side size mismatch")
    if n == 0:
        return np.empty(0)
    ab = np.zeros((3, n))
    ab[0, 1:] = matrix.off
    ab[1] = matrix.diag
    ab[2, :-1] = matrix.off
    try:
        x = scipy_solve_banded((1, 1), ab, b, overwrite_ab=True, check_finite=False)
    except np.linalg.LinAlgError:
        return _eliminate(matrix, b)
    if not np.all(np.isfinite(x)):
        return _eliminate(matrix, b)
    residual = np.linalg.norm(matrix.matvec(x) - b)
    scale = matrix.norm_inf() * np.linalg.norm(x) + np.linalg.norm(b)
    if residual > 1e-10 * scale:
        return _eliminate(matrix, b)
    return x


def assemble_mass(mesh: Mesh) -> TridiagonalMatrix:
    """Consistent mass matrix on the zero-trace space (interior nodes)."""
    h = mesh.lengths
    diag = (h[:-1] + h[1:]) / 3.0
    off = h[1:-1] / 6.0
    return TridiagonalMatrix(diag, off)


def assemble_stiffness(mesh: Mesh) -> TridiagonalMatrix:
    """Stiffness matrix (Dirichlet Laplacian) on the interior nodes."""
    h = mesh.lengths
    diag = 1.0 / h[:-1] + 1.0 / h[1:]
    off = -1.0 / h[1:-1]
    return TridiagonalMatrix(diag, off)


def _gauss_points(left: np.ndarray, right: np.ndarray):
    """Gauss-3 points and weights for a batch of intervals.

    Returns arrays of shape (3, len(left)).
    """
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    pts = mid[None, :] + half[None, :] * GAUSS3_NODES[:, None]
    wts = half[None, :] * GAUSS3_WEIGHTS[:, None]
    return pts, wts


def assemble_weighted_mass(mesh: Mesh, weight: Callable[[np.ndarray], np.ndarray]) -> TridiagonalMatrix:
    """Matrix of the weighted products int w(x) phi_i phi_j dx, Gauss-3 per element."""
    xl = mesh.nodes[:-1]
    xr = mesh.nodes[1:]
    h = mesh.lengths
    pts, wts = _gauss_points(xl, xr)
    wvals = np.asarray(weight(pts)) * wts
    phi_l = (xr[None, :] - pts) / h[None, :]
    phi_r = (pts - xl[None, :]) / h[None, :]
    a_ll = np.sum(wvals * phi_l * phi_l, axis=0)
    a_lr = np.sum(wvals * phi_l * phi_r, axis=0)
    a_rr = np.sum(wvals * phi_r * phi_r, axis=0)
    n_nodes = mesh.num_nodes
    diag = np.zeros(n_nodes)
    diag[:-1] += a_ll
    diag[1:] += a_rr
    # off-diagonal entry of node pair (i, i+1) comes from element i alone
    return TridiagonalMatrix(diag[1:-1], a_lr[1:-1])


def assemble_load(mesh: Mesh, source: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Load vector int s(x) phi_i dx on the interior nodes, Gauss-3 per element."""
    xl = mesh.nodes[:-1]
    xr = mesh.nodes[1:]
    h = mesh.lengths
    pts, wts = _gauss_points(xl, xr)
    svals = np.asarray(source(pts)) * wts
    phi_l = (xr[None, :] - pts) / h[None, :]
    phi_r = (pts - xl[None, :]) / h[None, :]
    b = np.zeros(mesh.num_nodes)
    b[:-1] += np.sum(svals * phi_l, axis=0)
    b[1:] += np.sum(svals * phi_r, axis=0)
    return b[1:-1]


def element_gauss(mesh: Mesh):
    """Gauss-3 points and weights per element, shape (3, num_elements)."""
    return _gauss_points(mesh.nodes[:-1], mesh.nodes[1:])


def weighted_mass_and_load(mesh: Mesh, pts: np.ndarray, wts: np.ndarray,
                           wvals: np.ndarray, svals: np.ndarray):
    """Weighted mass matrix and load vector from one shared Gauss-3 sweep.

    pts/wts come from element_gauss; wvals and svals are the weight and
    source already evaluated there. Matches assemble_weighted_mass and
    assemble_load exactly.
    """
    xl = mesh.nodes[:-1]
    xr = mesh.nodes[1:]
    h = mesh.lengths
    phi_l = (xr[None, :] - pts) / h[None, :]
    phi_r = (pts - xl[None, :]) / h[None, :]
    ww = np.asarray(wvals) * wts
    a_ll = np.sum(ww * phi_l * phi_l, axis=0)
    a_lr = np.sum(ww * phi_l * phi_r, axis=0)
    a_rr = np.sum(ww * phi_r * phi_r, axis=0)
    n_nodes = mesh.num_nodes
    diag = np.zeros(n_nodes)
    diag[:-1] += a_ll
    diag[1:] += a_rr
    sw = np.asarray(svals) * wts
    b = np.zeros(n_nodes)
    b[:-1] += np.sum(sw * phi_l, axis=0)
    b[1:] += np.sum(sw * phi_r, axis=0)
    return TridiagonalMatrix(diag[1:-1], a_lr[1:-1]), b[1:-1]


def union_nodes(mesh_a: Mesh, mesh_b: Mesh) -> np.ndarray:
    """Union of the node sets of two meshes over the same interval."""
    if mesh_a.nodes[0] != mesh_b.nodes[0] or mesh_a.nodes[-1] != mesh_b.nodes[-1]:
        raise ValueError("meshes cover different intervals")
    if mesh_a.nodes.shape == mesh_b.nodes.shape and np.array_equal(mesh_a.nodes, mesh_b.nodes):
        return mesh_a.nodes
    return np.union1d(mesh_a.nodes, mesh_b.nodes)


def subdivide(nodes: np.ndarray, n_sub: int) -> np.ndarray:
    """Insert n_sub - 1 equally spaced points into every interval."""
    if n_sub <= 1:
        return nodes
    frac = np.arange(n_sub) / n_sub
    fine = nodes[:-1, None] + np.diff(nodes)[:, None] * frac[None, :]
    return np.append(fine.ravel(), nodes[-1])


def partition_quadrature(nodes: np.ndarray):
    """Gauss-3 points and weights on each interval of a partition.

    Returns flat arrays (points, weights) ordered interval by interval.
    """
    pts, wts = _gauss_points(nodes[:-1], nodes[1:])
    return pts.T.ravel(), wts.T.ravel()


def mass_load(source: FeFunction, target: Mesh) -> np.ndarray:
    """Exact load vector int source phi_i dx for the target's interior hats.

    The source may live on a different mesh; integration runs on the union
    partition, where the integrand is a polynomial on every interval.
    """
    un = union_nodes(source.mesh, target)
    pts, wts = partition_quadrature(un)
    svals = source(pts) * wts
    elem = target.element_of(pts)
    xl = target.nodes[elem]
    xr = target.nodes[elem + 1]
    h = xr - xl
    to_left = np.bincount(elem, weights=svals * (xr - pts) / h, minlength=target.num_elements)
    to_right = np.bincount(elem, weights=svals * (pts - xl) / h, minlength=target.num_elements)
    b = np.zeros(target.num_nodes)
    b[:-1] += to_left
    b[1:] += to_right
    return b[1:-1]


def l2_project(source: Union[FeFunction, Callable[[np.ndarray], np.ndarray]],
               target: Mesh, n_sub: int = 8) -> FeFunction:
    """L2 projection onto the zero-trace space of the target mesh.

    Piecewise-linear sources are integrated exactly on the union partition.
    Plain callables are integrated with a composite Gauss-3 rule using n_sub
    subintervals per element. Boundary values of the result are zero.
    """
    mass = assemble_mass(target)
    if isinstance(source, FeFunction):
        b = mass_load(source, target)
    else:
        fine = subdivide(target.nodes, n_sub)
        pts, wts = partition_quadrature(fine)
        svals = np.asarray(source(pts)) * wts
        elem = target.element_of(pts)
        xl = target.nodes[elem]
        xr = target.nodes[elem + 1]
        h = xr - xl
        to_left = np.bincount(elem, weights=svals * (xr - pts) / h, minlength=target.num_elements)
        to_right = np.bincount(elem, weights=svals * (pts - xl) / h, minlength=target.num_elements)
        full = np.zeros(target.num_nodes)
        full[:-1] += to_left
        full[1:] += to_right
        b = full[1:-1]
    coeffs = solve_tridiagonal(mass, b)
    vals = np.zeros(target.num_nodes)
    vals[1:-1] = coeffs
    return FeFunction(target, vals)


def gradient_jump(u: FeFunction, node: int) -> float:
    """Jump of the gradient of u across an interior node (right minus left)."""
    if node <= 0 or node >= u.mesh.num_nodes - 1:
        raise ValueError(f"node {node} is not interior")
    s = u.slopes
    return float(s[node] - s[node - 1])


def gradient_jumps(u: FeFunction) -> np.ndarray:
    """Gradient jumps at all interior nodes."""
    s = u.slopes
    return s[1:] - s[:-1]


def norms(u: FeFunction, eps: float) -> tuple[float, float]:
    """L2 norm and energy norm (L2^2 + eps |grad|^2)^(1/2), both exact."""
    h = u.mesh.lengths
    vl = u.values[:-1]
    vr = u.values[1:]
    l2_sq = float(np.sum(h * (vl * vl + vl * vr + vr * vr) / 3.0))
    grad_sq = float(np.sum((vr - vl) ** 2 / h))
    return np.sqrt(l2_sq), np.sqrt(l2_sq + eps * grad_sq)


def l2_norm_sq_per_element(u: FeFunction) -> np.ndarray:
    """Exact per-element squares of the L2 norm."""
    h = u.mesh.lengths
    vl = u.values[:-1]
    vr = u.values[1:]
    return h * (vl * vl + vl * vr + vr * vr) / 3.0


def l2_diff(u: FeFunction, v: FeFunction) -> float:
    """Exact L2 norm of u - v for functions on possibly different meshes."""
    un = union_nodes(u.mesh, v.mesh)
    pts, wts = partition_quadrature(un)
    d = u(pts) - v(pts)
    return float(np.sqrt(np.sum(wts * d * d)))


def l2_error_callable(fn: Callable[[np.ndarray], np.ndarray], u: FeFunction,
                      n_sub: int = 16) -> float:
    """Composite-quadrature L2 norm of fn - u on u's mesh."""
    fine = subdivide(u.mesh.nodes, n_sub)
    pts, wts = partition_quadrature(fine)
    d = np.asarray(fn(pts)) - u(pts)
    return float(np.sqrt(np.sum(wts * d * d)))


def l2_error_sq_per_element(fn: Callable[[np.ndarray], np.ndarray], u: FeFunction,
                            n_sub: int = 16) -> np.ndarray:
    """Per-element squares of the composite-quadrature L2 error fn - u."""
    fine = subdivide(u.mesh.nodes, n_sub)
    pts, wts = partition_quadrature(fine)
    d = np.asarray(fn(pts)) - u(pts)
    elem = u.mesh.element_of(pts)
    return np.bincount(elem, weights=wts * d * d, minlength=u.mesh.num_elements)
