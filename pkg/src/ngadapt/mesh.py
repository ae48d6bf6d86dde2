"""Hierarchical 1d interval meshes with bisection refinement.

A mesh is a strictly increasing list of nodes on [a, b]. Elements are the
intervals between consecutive nodes. Refinement bisects an element at its
midpoint; coarsening merges a pair of elements that were created together by
one bisection (siblings). Every element carries its refinement level and its
position in the binary tree hanging off the initial mesh, which is what makes
the sibling test exact. Meshes are immutable; refine and coarsen return new
objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np


@dataclass(frozen=True, eq=False)
class Mesh:
    """1d mesh with per-element refinement bookkeeping.

    nodes   : ordered node coordinates, shape (m + 1,)
    levels  : refinement depth per element, 0 on the initial mesh
    roots   : index of the initial-mesh element each element descends from
    offsets : position among the 2**level fragments of that root element
    """

    nodes: np.ndarray
    levels: np.ndarray
    roots: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        for name in ("levels", "roots", "offsets"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("mesh needs at least two nodes")
        if not np.all(np.diff(nodes) > 0.0):
            raise ValueError("mesh nodes must be strictly increasing")
        m = nodes.size - 1
        if not (self.levels.size == self.roots.size == self.offsets.size == m):
            raise ValueError("per-element arrays must have one entry per element")
        if np.any(self.levels < 0):
            raise ValueError("element levels must be non-negative")

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def num_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def num_nodes(self) -> int:
        return self.nodes.size

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @cached_property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def element_of(self, x: np.ndarray) -> np.ndarray:
        """Element index containing each query point (clamped to [0, m-1])."""
        idx = np.searchsorted(self.nodes, np.asarray(x), side="right") - 1
        return np.clip(idx, 0, self.num_elements - 1)

    def siblings(self, i: int, j: int) -> bool:
        """True when elements i and j are a mergeable bisection pair."""
        if abs(i - j) != 1:
            return False
        lo = min(i, j)
        if self.levels[lo] != self.levels[lo + 1] or self.levels[lo] < 1:
            return False
        if self.roots[lo] != self.roots[lo + 1]:
            return False
        return self.offsets[lo] % 2 == 0 and self.offsets[lo + 1] == self.offsets[lo] + 1

    def __repr__(self) -> str:  # pragma: no cover
        return f"Mesh({self.num_elements} elements on [{self.a:g}, {self.b:g}])"


@dataclass(frozen=True)
class NodeInheritance:
    """How the nodes of a refined mesh derive from the parent mesh.

    Node i of the new mesh is either a copy of old node left[i] (left == right)
    or the midpoint of old nodes left[i], right[i]. Applying the map to nodal
    values performs the exact piecewise-linear transfer onto the refined mesh.
    """

    left: np.ndarray
    right: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        out = 0.5 * (values[self.left] + values[self.right])
        copied = self.left == self.right
        out[copied] = values[self.left[copied]]
        return out


@dataclass(frozen=True)
class CoarsenResult:
    """Outcome of a coarsening pass: the new mesh, the node coordinates that
    were removed, and the marks that were ignored as not mergeable."""

    mesh: Mesh
    removed_nodes: np.ndarray
    ignored: tuple[int, ...]


@dataclass(frozen=True)
class Weights:
    """Diffusion-scaled indicator weights min(1, h / sqrt(eps)).

    alpha_elem has one entry per element (h = element length); alpha_node has
    one entry per interior node (h = mean of the two adjacent lengths).
    """

    eps: float
    alpha_elem: np.ndarray
    alpha_node: np.ndarray


def uniform_mesh(a: float, b: float, m: int) -> Mesh:
    """Uniform mesh with m elements on [a, b]."""
    if not b > a:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if m < 1:
        raise ValueError("need at least one element")
    nodes = np.linspace(a, b, m + 1)
    zeros = np.zeros(m, dtype=np.int64)
    return Mesh(nodes, zeros, np.arange(m, dtype=np.int64), zeros.copy())


def from_nodes(nodes: Iterable[float]) -> Mesh:
    """Mesh over the given nodes, treated as a fresh initial mesh (level 0)."""
    nodes = np.asarray(list(nodes), dtype=float)
    m = nodes.size - 1
    zeros = np.zeros(m, dtype=np.int64)
    return Mesh(nodes, zeros, np.arange(m, dtype=np.int64), zeros.copy())


def rebase(mesh: Mesh) -> Mesh:
    """Same nodes, refinement history erased (all elements become level 0)."""
    return from_nodes(mesh.nodes)


def refine(mesh: Mesh, marked: Iterable[int]) -> tuple[Mesh, NodeInheritance]:
    """Bisect the marked elements at their midpoints.

    Returns the refined mesh and the node inheritance map for exact transfer
    of piecewise-linear nodal values. Unknown element ids raise ValueError.
    """
    marks = np.unique(np.asarray(list(marked), dtype=np.int64))
    if marks.size == 0:
        ident = np.arange(mesh.num_nodes, dtype=np.int64)
        return mesh, NodeInheritance(ident, ident.copy())
    if marks[0] < 0 or marks[-1] >= mesh.num_elements:
        raise ValueError(f"element id out of range: {int(marks[0] if marks[0] < 0 else marks[-1])}")
    split = np.zeros(mesh.num_elements, dtype=bool)
    split[marks] = True

    new_nodes = [mesh.nodes[0]]
    left = [0]
    right = [0]
    levels, roots, offsets = [], [], []
    for e in range(mesh.num_elements):
        if split[e]:
            mid = 0.5 * (mesh.nodes[e] + mesh.nodes[e + 1])
            new_nodes.append(mid)
            left.append(e)
            right.append(e + 1)
            levels.extend((mesh.levels[e] + 1, mesh.levels[e] + 1))
            roots.extend((mesh.roots[e], mesh.roots[e]))
            offsets.extend((2 * mesh.offsets[e], 2 * mesh.offsets[e] + 1))
        else:
            levels.append(mesh.levels[e])
            roots.append(mesh.roots[e])
            offsets.append(mesh.offsets[e])
        new_nodes.append(mesh.nodes[e + 1])
        left.append(e + 1)
        right.append(e + 1)
    refined = Mesh(np.asarray(new_nodes), np.asarray(levels), np.asarray(roots), np.asarray(offsets))
    inh = NodeInheritance(np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64))
    return refined, inh


def coarsen(mesh: Mesh, marked: Iterable[int]) -> CoarsenResult:
    """Merge sibling pairs whose two members are both marked.

    Marks that do not form a mergeable sibling pair are ignored and reported
    in the result. Level-0 elements never merge, so the initial mesh is the
    coarsest state reachable.
    """
    marks = set(int(i) for i in marked)
    for i in marks:
        if i < 0 or i >= mesh.num_elements:
            raise ValueError(f"element id out of range: {i}")

    keep_node = np.ones(mesh.num_nodes, dtype=bool)
    levels = []
    roots = []
    offsets = []
    merged_any = []
    e = 0
    while e < mesh.num_elements:
        if e + 1 < mesh.num_elements and e in marks and (e + 1) in marks and mesh.siblings(e, e + 1):
            keep_node[e + 1] = False
            levels.append(mesh.levels[e] - 1)
            roots.append(mesh.roots[e])
            offsets.append(mesh.offsets[e] // 2)
            merged_any.extend((e, e + 1))
            e += 2
        else:
            levels.append(mesh.levels[e])
            roots.append(mesh.roots[e])
            offsets.append(mesh.offsets[e])
            e += 1
    removed = mesh.nodes[~keep_node]
    ignored = tuple(sorted(marks.difference(merged_any)))
    new_mesh = Mesh(mesh.nodes[keep_node], np.asarray(levels), np.asarray(roots), np.asarray(offsets))
    return CoarsenResult(new_mesh, removed, ignored)


def weights(mesh: Mesh, eps: float) -> Weights:
    """Indicator weights for diffusion coefficient eps."""
    if eps <= 0.0:
        raise ValueError("diffusion coefficient must be positive")
    root = np.sqrt(eps)
    h = mesh.lengths
    alpha_elem = np.minimum(1.0, h / root)
    h_node = 0.5 * (h[:-1] + h[1:])
    alpha_node = np.minimum(1.0, h_node / root)
    return Weights(eps, alpha_elem, alpha_node)
