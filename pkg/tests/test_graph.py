import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smoothpairs.graph import (
    Graph,
    GraphError,
    bfs_reaches_all,
    clustering_coefficient,
    densify_neighborhoods,
    edge_set,
    load_edge_list,
    load_id_map,
    neg_sampling_distribution,
    save_edge_list,
    save_id_map,
    split_link_prediction,
    synth_scale_free,
)


def complete(n):
    return Graph.from_edges(n, list(itertools.combinations(range(n), 2)))


def path(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


@pytest.fixture
def triangle():
    return complete(3)


def write(tmp_path, text, name="g.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_triangle(tmp_path):
    g, ids, loops, dups = load_edge_list(write(tmp_path, "0 1\n1 2\n2 0"))
    assert (g.n, g.m) == (3, 3)
    assert (loops, dups) == (0, 0)
    assert ids.tolist() == [0, 1, 2]


def test_load_drops_duplicates_and_self_loops(tmp_path):
    g, ids, loops, dups = load_edge_list(write(tmp_path, "0 1\n1 0\n5 5"))
    assert (g.n, g.m) == (2, 1)
    assert (loops, dups) == (1, 1)


def test_load_remaps_and_skips_comments(tmp_path):
    g, ids, *_ = load_edge_list(write(tmp_path, "# header\n\n10 30\n30 20\n"))
    assert ids.tolist() == [10, 20, 30]
    assert edge_set(g.edges()) == {(0, 2), (1, 2)}


@pytest.mark.parametrize("text, match", [
    ("0 1\n2\n", ":2:"),
    ("0 1\na b\n", ":2:"),
    ("# nothing\n", "no edges"),
    ("3 3\n", "no edges"),
])
def test_load_errors(tmp_path, text, match):
    with pytest.raises(GraphError, match=match):
        load_edge_list(write(tmp_path, text))


def test_load_missing_file(tmp_path):
    with pytest.raises(GraphError, match="cannot read"):
        load_edge_list(tmp_path / "absent.txt")


def test_save_load_roundtrip(tmp_path):
    g = synth_scale_free(60, 2, seed=4)
    ids = np.arange(g.n) * 7 + 3
    save_edge_list(g, tmp_path / "e.txt", ids)
    save_id_map(ids, tmp_path / "ids.txt")
    g2, ids2, *_ = load_edge_list(tmp_path / "e.txt")
    assert g2 == g
    assert np.array_equal(ids2, ids)
    assert np.array_equal(load_id_map(tmp_path / "ids.txt"), ids)


def test_graph_invariants():
    g = synth_scale_free(200, 3, seed=1)
    deg = g.degrees
    assert deg.sum() == 2 * g.m
    for u in range(g.n):
        nb = g.neighbors(u)
        assert np.all(np.diff(nb) > 0)
        assert u not in nb
        for v in nb:
            assert g.has_edge(int(v), u)


def test_clustering_triangle_and_path(triangle):
    assert clustering_coefficient(triangle) == 1.0
    assert clustering_coefficient(path(3)) == 0.0


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_clustering_cliques(n):
    assert clustering_coefficient(complete(n)) == pytest.approx(1.0)


def test_clustering_not_one_without_clique():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 0), (2, 3)])
    cc = clustering_coefficient(g)
    # nodes 0,1: 1; node 2: 1/3; node 3: 0
    assert cc == pytest.approx((1 + 1 + 1 / 3 + 0) / 4)


@given(st.integers(8, 60), st.integers(1, 3), st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_clustering_in_unit_interval(n, m_attach, seed):
    cc = clustering_coefficient(synth_scale_free(n, m_attach, seed))
    assert 0.0 <= cc <= 1.0


def star(leaves):
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def test_neg_sampling_linear():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (1, 3)])  # degrees 1,3,2,2
    mu = neg_sampling_distribution(g, 1.0)
    assert mu.weights == pytest.approx(np.array([1, 3, 2, 2]) / 8)


def test_neg_sampling_uniform_at_zero_alpha():
    mu = neg_sampling_distribution(synth_scale_free(30, 2, 0), 0.0)
    assert mu.weights == pytest.approx(np.full(30, 1 / 30))


def test_neg_sampling_three_quarters():
    # star K_{1,16}: centre degree 16, leaves degree 1
    mu = neg_sampling_distribution(star(16), 0.75)
    # 16^0.75 = 8, so centre : leaves = 8 : 16
    assert mu.weights[0] == pytest.approx(8 / 24)
    assert mu.weights[1] == pytest.approx(1 / 24)


def test_neg_sampling_degree_one_and_sixteen():
    from smoothpairs.graph import NodeDistribution
    d = np.array([1.0, 16.0])
    mu = NodeDistribution.from_weights(d ** 0.75)
    assert mu.weights == pytest.approx([1 / 9, 8 / 9])


@pytest.mark.parametrize("alpha", [0, 0.5, 0.75, 1])
def test_neg_sampling_normalised(alpha):
    mu = neg_sampling_distribution(synth_scale_free(300, 3, 2), alpha)
    assert abs(mu.weights.sum() - 1) < 1e-9
    assert np.all(np.diff(mu.cumulative) >= 0)
    assert mu.cumulative[-1] == 1.0


def test_neg_sampling_all_zero_is_error():
    from smoothpairs.graph import NodeDistribution
    with pytest.raises(GraphError):
        NodeDistribution.from_weights([0.0, 0.0])


def test_split_triangle(triangle):
    reduced, removed = split_link_prediction(triangle, 0.34, seed=0)
    assert len(removed) == 1
    assert reduced.m == 2
    assert bfs_reaches_all(reduced)


def test_split_tree_fails():
    with pytest.raises(GraphError, match="only remove 0"):
        split_link_prediction(path(10), 0.2, seed=0)


def test_split_rejects_disconnected():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(GraphError, match="connected"):
        split_link_prediction(g, 0.2, seed=0)


def test_split_scale_free():
    g = synth_scale_free(2000, 3, seed=11)
    reduced, removed = split_link_prediction(g, 0.2, seed=5)
    assert len(removed) == math.floor(0.2 * g.m)
    assert bfs_reaches_all(reduced)
    full = edge_set(g.edges())
    kept = edge_set(reduced.edges())
    gone = edge_set(removed)
    assert kept <= full
    assert kept | gone == full
    assert not kept & gone


def test_split_deterministic():
    g = synth_scale_free(300, 3, seed=2)
    a = split_link_prediction(g, 0.2, seed=9)
    b = split_link_prediction(g, 0.2, seed=9)
    assert a[0] == b[0]
    assert np.array_equal(a[1], b[1])


def test_scale_free_small_tree():
    g = synth_scale_free(5, 1, seed=3)
    assert g.m == 4
    assert g.is_connected()


def test_scale_free_edge_count_and_power_law():
    g = synth_scale_free(2000, 3, seed=0)
    assert g.m == 5991
    assert g.is_connected()
    deg, cnt = np.unique(g.degrees, return_counts=True)
    slope = np.polyfit(np.log(deg), np.log(cnt), 1)[0]
    assert slope < -1.5


def test_scale_free_deterministic():
    assert synth_scale_free(100, 2, 7) == synth_scale_free(100, 2, 7)
    assert synth_scale_free(100, 2, 7) != synth_scale_free(100, 2, 8)


@pytest.mark.parametrize("n, m", [(3, 3), (2, 0), (1, 1)])
def test_scale_free_invalid(n, m):
    with pytest.raises(GraphError):
        synth_scale_free(n, m, 0)


def test_densify_star():
    g = star(4)
    out = densify_neighborhoods(g, hub_fraction=0.2, extra_edges=1, seed=0)
    assert out.m == g.m + 1
    assert clustering_coefficient(g) == 0.0
    assert clustering_coefficient(out) > 0.0


def test_densify_identity():
    g = synth_scale_free(50, 2, 0)
    assert densify_neighborhoods(g, 0.5, 0, seed=1) == g


def test_densify_reaches_high_clustering():
    g = synth_scale_free(2000, 3, seed=0)
    base = clustering_coefficient(g)
    out = densify_neighborhoods(g, hub_fraction=1.0, extra_edges=6000, seed=1)
    assert base < 0.05
    assert clustering_coefficient(out) > 0.3
    assert edge_set(g.edges()) <= edge_set(out.edges())


def test_densify_exhausts_attempts():
    with pytest.raises(GraphError, match="placed only"):
        densify_neighborhoods(star(3), 0.25, 10, seed=0)
