import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from doboc.graph import (
    GraphError,
    build_metropolis_weights,
    complete_edges,
    connected_components,
    dense_mixing_operator,
    from_weight_matrix,
    mix,
    path_edges,
    ring_edges,
    star_edges,
    validate_weights,
)


def test_single_agent_weight_is_one():
    g = build_metropolis_weights(1, [])
    np.testing.assert_array_equal(g.weights, [[1.0]])
    assert g.w_min == 1.0
    assert list(g.neighbors[0]) == []


def test_two_agents():
    g = build_metropolis_weights(2, [(0, 1)])
    np.testing.assert_array_equal(g.weights, [[0.5, 0.5], [0.5, 0.5]])


def test_path_of_three():
    g = build_metropolis_weights(3, path_edges(3))
    expected = np.array([[2 / 3, 1 / 3, 0.0], [1 / 3, 1 / 3, 1 / 3], [0.0, 1 / 3, 2 / 3]])
    np.testing.assert_allclose(g.weights, expected, rtol=0, atol=1e-15)
    assert g.weights[0, 2] == 0.0
    assert validate_weights(g).ok


def test_disconnected_graph_lists_components():
    with pytest.raises(GraphError, match=r"\[\[1, 2\], \[3\], \[4\]\]"):
        build_metropolis_weights(4, [(0, 1)])


def test_zero_agents_rejected():
    with pytest.raises(GraphError):
        build_metropolis_weights(0, [])


def test_self_loop_rejected():
    with pytest.raises(GraphError):
        build_metropolis_weights(2, [(0, 0), (0, 1)])


def test_components_of_star():
    assert connected_components(4, star_edges(4)) == [[0, 1, 2, 3]]
    assert connected_components(3, []) == [[0], [1], [2]]


def test_asymmetric_weights_reported():
    g = from_weight_matrix([[0.6, 0.4], [0.5, 0.5]], validate=False)
    rep = validate_weights(g)
    assert not rep["symmetry"].passed
    assert rep["symmetry"].violation == pytest.approx(0.1)


def test_zero_diagonal_reported():
    g = from_weight_matrix([[0.0, 1.0], [1.0, 0.0]], validate=False)
    rep = validate_weights(g)
    assert not rep["diagonal_positive"].passed
    assert rep["symmetry"].passed


def test_explicit_weights_validated_on_load():
    with pytest.raises(GraphError, match="symmetry"):
        from_weight_matrix([[0.6, 0.4], [0.5, 0.5]])


def test_metropolis_rows_sum_to_one_on_standard_graphs():
    for edges in (ring_edges(6), star_edges(5), complete_edges(4), path_edges(7)):
        n = 1 + max(max(e) for e in edges)
        g = build_metropolis_weights(n, edges)
        assert validate_weights(g).ok
        assert np.max(np.abs(g.weights.sum(axis=1) - 1)) <= 1e-12
        np.testing.assert_array_equal(g.weights, g.weights.T)


def test_mix_examples():
    g2 = build_metropolis_weights(2, [(0, 1)])
    np.testing.assert_array_equal(mix(g2, [[1.0], [0.0]]), [[0.5], [0.5]])
    g1 = build_metropolis_weights(1, [])
    np.testing.assert_array_equal(mix(g1, [[7.5]]), [[7.5]])
    g5 = build_metropolis_weights(5, ring_edges(5))
    np.testing.assert_array_equal(mix(g5, np.full((5, 1), 3.0)), np.full((5, 1), 3.0))


def test_mix_rejects_wrong_block_count():
    g = build_metropolis_weights(3, path_edges(3))
    with pytest.raises(ValueError):
        mix(g, np.zeros((2, 1)))


def test_messages_per_round():
    g = build_metropolis_weights(4, star_edges(4))
    # hub has 3 neighbors, leaves 1 each
    assert g.messages_per_round(2) == (3 + 1 + 1 + 1) * 2


@st.composite
def connected_graphs(draw, max_n=7):
    n = draw(st.integers(1, max_n))
    # random spanning tree plus extra edges
    edges = {(draw(st.integers(0, i - 1)), i) for i in range(1, n)}
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if pairs:
        edges |= set(draw(st.lists(st.sampled_from(pairs), max_size=len(pairs))))
    return n, sorted(edges)


@given(connected_graphs())
def test_metropolis_always_valid(graph):
    n, edges = graph
    g = build_metropolis_weights(n, edges)
    rep = validate_weights(g)
    assert rep.ok, rep.failed
    for i, j in edges:
        assert g.weights[i, j] == 1.0 / (1 + max(g.degrees[i], g.degrees[j]))


@given(connected_graphs(), st.integers(1, 4), st.integers(0, 2**32 - 1),
       st.floats(-3, 3), st.floats(-3, 3))
def test_mix_linear_and_matches_dense(graph, p, seed, alpha, beta):
    n, edges = graph
    g = build_metropolis_weights(n, edges)
    r = np.random.default_rng(seed)
    x, y = r.standard_normal((n, p)), r.standard_normal((n, p))
    lhs = mix(g, alpha * x + beta * y)
    rhs = alpha * mix(g, x) + beta * mix(g, y)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12
    dense = (dense_mixing_operator(g, p) @ x.ravel()).reshape(n, p)
    assert np.max(np.abs(mix(g, x) - dense)) <= 1e-12


@given(connected_graphs(), st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=4))
def test_consensus_direction_fixed(graph, v):
    n, edges = graph
    g = build_metropolis_weights(n, edges)
    x = np.tile(np.array(v), (n, 1))
    assert np.max(np.abs(mix(g, x) - x)) <= 1e-15 * max(1.0, np.max(np.abs(v))) * 4
