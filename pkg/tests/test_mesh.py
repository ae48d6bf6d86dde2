"""Mesh construction, bisection refinement, sibling coarsening, weights."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ngadapt import mesh as msh


def test_uniform_mesh_basic():
    m = msh.uniform_mesh(0.0, 4.0, 2)
    assert m.num_elements == 2
    assert np.allclose(m.nodes, [0.0, 2.0, 4.0])
    assert np.all(m.levels == 0)


def test_uniform_mesh_lengths_sum():
    m = msh.uniform_mesh(-1.0, 2.5, 7)
    assert np.isclose(m.lengths.sum(), 3.5)


def test_bad_mesh_rejected():
    with pytest.raises(ValueError):
        msh.uniform_mesh(1.0, 1.0, 4)
    with pytest.raises(ValueError):
        msh.uniform_mesh(0.0, 1.0, 0)
    with pytest.raises(ValueError):
        msh.from_nodes([0.0, 0.5, 0.5, 1.0])


def test_refine_single_element():
    m = msh.uniform_mesh(0.0, 1.0, 2)
    fine, inh = msh.refine(m, [0])
    assert fine.num_elements == 3
    assert np.allclose(fine.nodes, [0.0, 0.25, 0.5, 1.0])
    assert list(fine.levels) == [1, 1, 0]
    # transfer of the nodal interpolant of x stays the interpolant of x
    vals = inh.apply(m.nodes)
    assert np.array_equal(vals, fine.nodes)


def test_refine_all_elements_doubles_count():
    m = msh.uniform_mesh(0.0, 1.0, 8)
    fine, _ = msh.refine(m, range(8))
    assert fine.num_elements == 16
    assert np.allclose(fine.lengths, 1.0 / 16.0)


def test_refine_unknown_id_raises():
    m = msh.uniform_mesh(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        msh.refine(m, [4])
    with pytest.raises(ValueError):
        msh.refine(m, [-1])


def test_refine_empty_marks_is_identity():
    m = msh.uniform_mesh(0.0, 1.0, 4)
    fine, inh = msh.refine(m, [])
    assert fine is m
    assert np.array_equal(inh.apply(np.arange(5.0)), np.arange(5.0))


def test_coarsen_undoes_refine():
    m = msh.uniform_mesh(0.0, 1.0, 4)
    fine, _ = msh.refine(m, [1, 2])
    res = msh.coarsen(fine, range(fine.num_elements))
    assert np.array_equal(res.mesh.nodes, m.nodes)
    assert np.array_equal(res.mesh.levels, m.levels)
    assert set(res.removed_nodes) == {fine.nodes[2], fine.nodes[4]}


def test_coarsen_needs_both_siblings_marked():
    m = msh.uniform_mesh(0.0, 1.0, 2)
    fine, _ = msh.refine(m, [0, 1])  # elements: pairs (0,1) and (2,3)
    res = msh.coarsen(fine, [0, 2, 3])
    # only the (2,3) pair merges; 0 is ignored because 1 is unmarked
    assert res.mesh.num_elements == 3
    assert res.ignored == (0,)


def test_coarsen_never_crosses_parents():
    m = msh.uniform_mesh(0.0, 1.0, 2)
    fine, _ = msh.refine(m, [0, 1])
    # elements 1 and 2 are adjacent, same level, but different parents
    res = msh.coarsen(fine, [1, 2])
    assert res.mesh.num_elements == 4
    assert res.ignored == (1, 2)


def test_coarsen_floors_at_initial_mesh():
    m = msh.uniform_mesh(0.0, 1.0, 4)
    res = msh.coarsen(m, [0, 1, 2, 3])
    assert res.mesh.num_elements == 4
    assert res.ignored == (0, 1, 2, 3)


def test_rebase_erases_history():
    m = msh.uniform_mesh(0.0, 1.0, 2)
    fine, _ = msh.refine(m, [0])
    re = msh.rebase(fine)
    assert np.array_equal(re.nodes, fine.nodes)
    assert np.all(re.levels == 0)
    assert msh.coarsen(re, range(re.num_elements)).mesh.num_elements == re.num_elements


def test_weights_saturate_at_one():
    m = msh.uniform_mesh(0.0, 1.0, 4)  # h = 0.25
    w = msh.weights(m, 1e-4)  # sqrt(eps) = 0.01 << h
    assert np.allclose(w.alpha_elem, 1.0)
    assert np.allclose(w.alpha_node, 1.0)


def test_weights_unsaturated_values():
    m = msh.uniform_mesh(0.0, 1.0, 4)
    w = msh.weights(m, 1.0)  # sqrt(eps) = 1 > h
    assert np.allclose(w.alpha_elem, 0.25)
    assert np.allclose(w.alpha_node, 0.25)
    assert w.alpha_node.shape == (3,)


def test_weights_reject_bad_eps():
    m = msh.uniform_mesh(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        msh.weights(m, 0.0)


@st.composite
def mesh_and_ops(draw):
    """A mesh plus a random sequence of refine/coarsen mark sets."""
    m0 = draw(st.integers(min_value=1, max_value=6))
    ops = draw(st.lists(st.lists(st.integers(min_value=0, max_value=60),
                                 max_size=8), max_size=5))
    return m0, ops


@given(mesh_and_ops())
@settings(max_examples=60, deadline=None)
def test_mesh_invariants_under_random_ops(case):
    m0, ops = case
    m = msh.uniform_mesh(0.0, 1.0, m0)
    for i, marks in enumerate(ops):
        marks = [k % m.num_elements for k in marks]
        if i % 2 == 0:
            m, _ = msh.refine(m, marks)
        else:
            m = msh.coarsen(m, marks).mesh
        # lengths tile the domain and levels stay consistent with lengths
        assert np.all(np.diff(m.nodes) > 0)
        assert np.isclose(m.lengths.sum(), 1.0, rtol=1e-12)
        assert np.all(m.levels >= 0)
        expected = 1.0 / m0 / 2.0 ** m.levels
        assert np.allclose(m.lengths, expected, rtol=1e-12)


@given(st.integers(min_value=2, max_value=8),
       st.lists(st.integers(min_value=0, max_value=100), min_size=1, max_size=6),
       st.lists(st.floats(min_value=-5, max_value=5), min_size=9, max_size=9))
@settings(max_examples=60, deadline=None)
def test_refine_transfer_is_exact(m0, marks, raw_vals):
    m = msh.uniform_mesh(0.0, 1.0, m0)
    vals = np.interp(m.nodes, np.linspace(0, 1, 9), raw_vals)
    fine, inh = msh.refine(m, [k % m.num_elements for k in marks])
    vnew = inh.apply(vals)
    # the transferred function agrees with the original at all new nodes
    assert np.allclose(vnew, np.interp(fine.nodes, m.nodes, vals), atol=1e-14)


@given(st.floats(min_value=1e-8, max_value=10.0))
@settings(max_examples=40, deadline=None)
def test_weight_monotone_in_eps(eps):
    m = msh.uniform_mesh(0.0, 1.0, 5)
    w1 = msh.weights(m, eps)
    w2 = msh.weights(m, eps * 4.0)
    assert np.all(w2.alpha_elem <= w1.alpha_elem + 1e-15)
    assert np.all(w1.alpha_elem <= 1.0) and np.all(w1.alpha_elem > 0.0)
