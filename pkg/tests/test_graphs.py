import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbnco import graphs
from pbnco.baselines import brute_force
from pbnco.problems import random_solution


def test_er_extremes():
    assert graphs.generate_er(3, 1.0, 11).m == 3
    assert graphs.generate_er(5, 0.0, 11).m == 0


def test_er_edge_count_within_four_sigma():
    g = graphs.generate_er(200, 0.15, 7)
    assert abs(g.m - 2985) < 202


def test_er_edge_counts_binomial_over_seeds():
    n, p = 40, 0.2
    N = n * (n - 1) / 2
    mean, sd = N * p, np.sqrt(N * p * (1 - p))
    counts = np.array([graphs.generate_er(n, p, s).m for s in range(100)])
    assert np.all(np.abs(counts - mean) < 4 * sd)
    # the sample mean of 100 draws is much tighter
    assert abs(counts.mean() - mean) < 4 * sd / 10


def test_er_rejects_bad_probability():
    with pytest.raises(ValueError):
        graphs.generate_er(5, 1.5, 0)
    with pytest.raises(ValueError):
        graphs.generate_er(0, 0.5, 0)


def test_er_is_deterministic():
    a = graphs.serialize_instance(graphs.generate_er(30, 0.3, 99))
    b = graphs.serialize_instance(graphs.generate_er(30, 0.3, 99))
    assert a == b


def test_rb_without_constraint_rounds_is_disjoint_cliques():
    g = graphs.generate_rb(2, 2, 0.5, 1e-9, 0)
    assert g.n == 4 and g.m == 2


@pytest.mark.parametrize("seed", range(5))
def test_rb_groups_are_cliques(seed):
    g = graphs.generate_rb(4, 5, 0.25, 0.8, seed)
    adj = g.adjacency
    for k in range(4):
        grp = range(5 * k, 5 * k + 5)
        assert all(adj[u, v] for u in grp for v in grp if u != v)


def test_rb_small_mis_bounded_by_group_count():
    g = graphs.generate_rb(3, 3, 0.5, 1.0, 1)
    assert g.n == 9
    assert brute_force(g, "MIS")[0] <= 3


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(2, 5), st.integers(0, 2**31))
def test_rb_maximal_independent_sets_hit_each_group_at_most_once(groups, d, seed):
    g = graphs.generate_rb(groups, d, 0.3, 0.8, seed)
    s = random_solution(g, "MIS", np.random.default_rng(seed))
    per_group = s.reshape(groups, d).sum(axis=1)
    assert per_group.max() <= 1


def test_roundtrip_k3_and_singleton():
    for g in (graphs.complete_graph(3), graphs.GraphInstance(1, [])):
        assert graphs.parse_instance(graphs.serialize_instance(g)) == g


def test_roundtrip_er_keeps_canonical_order():
    g = graphs.generate_er(50, 0.15, 3)
    h = graphs.parse_instance(graphs.serialize_instance(g))
    assert h == g
    e = h.edges
    assert np.all(e[:, 0] < e[:, 1])
    assert np.all(np.lexsort((e[:, 1], e[:, 0])) == np.arange(len(e)))


def test_roundtrip_weights_and_file(tmp_path):
    g = graphs.GraphInstance(4, [(0, 1), (2, 3)], edge_weights=[0.5, 2.25])
    path = tmp_path / "w.graph"
    graphs.write_instance(path, g)
    assert graphs.read_instance(path) == g


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 25), st.floats(0, 1), st.integers(0, 2**40))
def test_roundtrip_property(n, p, seed):
    g = graphs.generate_er(n, p, seed)
    assert graphs.parse_instance(graphs.serialize_instance(g)) == g


def test_edges_are_canonicalized():
    g = graphs.GraphInstance(3, [(2, 1), (1, 0)])
    assert g.edges.tolist() == [[0, 1], [1, 2]]


@pytest.mark.parametrize("edges, weights", [
    ([(0, 0)], None),
    ([(0, 1), (1, 0)], None),
    ([(0, 5)], None),
    ([(0, 1)], [0.0]),
    ([(0, 1)], [1.0, 2.0]),
])
def test_invalid_instances_are_rejected(edges, weights):
    with pytest.raises(ValueError):
        graphs.GraphInstance(3, edges, edge_weights=weights)


@pytest.mark.parametrize("text, offset", [
    (b"p edge 3 1\ne 0 x\n", 11),
    (b"e 0 1\n", 0),
    (b"p edge 3 2\ne 0 1\n", None),
])
def test_parse_errors_carry_offsets(text, offset):
    with pytest.raises(graphs.ParseError) as err:
        graphs.parse_instance(text)
    if offset is not None:
        assert err.value.offset == offset
