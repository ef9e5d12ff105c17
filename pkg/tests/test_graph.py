import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowbalance import (AssumptionViolation, ScenarioError, build_graph, is_connected,
                         partition_edges)
from flowbalance.verify import random_connected_graph, random_tree


def test_triangle_incidence(triangle):
    expected = np.array([[-1, 0, 1], [1, -1, 0], [0, 1, -1]])
    np.testing.assert_array_equal(triangle.B, expected)
    assert triangle.m == 3


def test_triangle_partition(triangle):
    part = partition_edges(triangle)
    assert part.a_indices == (0, 1)
    assert part.b_indices == (2,)
    assert sorted(part.perm) == [0, 1, 2]


def test_incidence_is_read_only(triangle):
    with pytest.raises(ValueError):
        triangle.B[0, 0] = 5.0


@pytest.mark.parametrize("edges", [[(1, 1)], [(0, 1)], [(1, 4)]])
def test_invalid_edges_rejected(edges):
    with pytest.raises(ScenarioError):
        build_graph(3, edges)


def test_disconnected_graph_rejected():
    g = build_graph(4, [(2, 1), (4, 3)])
    assert not is_connected(g)
    with pytest.raises(AssumptionViolation):
        partition_edges(g)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_incidence_properties(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n_max=8)
    B = g.B
    np.testing.assert_array_equal(B.sum(axis=0), 0)
    assert (np.abs(B).sum(axis=0) == 2).all()
    assert np.linalg.matrix_rank(B) == g.n - 1
    part = partition_edges(g)
    Ba = B[:, list(part.a_indices)]
    assert len(part.a_indices) == g.n - 1
    assert np.linalg.matrix_rank(Ba) == g.n - 1
    # every redundant column is a combination of the tree columns
    Bb = B[:, list(part.b_indices)]
    if Bb.size:
        coef = np.linalg.lstsq(Ba, Bb, rcond=None)[0]
        np.testing.assert_allclose(Ba @ coef, Bb, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_tree_has_no_redundant_edges(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    g = build_graph(n, random_tree(rng, n))
    assert partition_edges(g).b_indices == ()
