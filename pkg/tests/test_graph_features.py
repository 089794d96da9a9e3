import numpy as np
import pytest

from glpos.embeddings import EmbeddingProvider
from glpos.graph_features import (C_MAX, CENTRALITIES, GraphFeatures, assemble_node_features,
                                  centrality_array, community_ordinals, greedy_modularity,
                                  is_lp_fixed_point, label_propagation, modularity)
from glpos.mag import Mag

from conftest import random_graph
from oracles import centralities as oracle_centralities, max_modularity

nx = pytest.importorskip("networkx")


def col(name):
    return CENTRALITIES.index(name)


def test_path_example():
    c = centrality_array(3, [(0, 1), (1, 2)])
    np.testing.assert_allclose(c[1], [1.0, 1.0, 1.0, 1.0, 1.0])
    np.testing.assert_allclose(c[0], [0.5, 2 / 3, 0.0, 0.0, 0.75])


def test_star_center():
    c = centrality_array(5, [(0, k) for k in range(1, 5)])
    assert c[0, col("betweenness")] == pytest.approx(1.0)
    assert c[0, col("load")] == pytest.approx(1.0)
    assert (c[1:, col("betweenness")] == 0).all()


def test_tiny_graphs_have_no_betweenness():
    for n, e in [(1, []), (2, []), (2, [(0, 1)])]:
        c = centrality_array(n, e)
        assert (c[:, [col("betweenness"), col("load")]] == 0).all()
        assert np.isfinite(c).all()


def test_against_bruteforce_and_networkx():
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = int(rng.integers(3, 11))
        edges = random_graph(rng, n, rng.uniform(0.1, 0.7))
        got = centrality_array(n, edges)
        np.testing.assert_allclose(got, oracle_centralities(n, edges), atol=1e-9)
        G = nx.Graph()
        G.add_nodes_from(range(n))
        G.add_edges_from(edges)
        ref = [nx.degree_centrality(G), nx.closeness_centrality(G), nx.betweenness_centrality(G),
               nx.load_centrality(G), {k: v / (n - 1) for k, v in nx.harmonic_centrality(G).items()}]
        for j, d in enumerate(ref):
            np.testing.assert_allclose(got[:, j], [d[i] for i in range(n)], atol=1e-9)


def test_permutation_equivariance():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 12))
        edges = random_graph(rng, n, 0.4)
        perm = rng.permutation(n)
        moved = sorted(tuple(sorted((int(perm[a]), int(perm[b])))) for a, b in edges)
        a, b = centrality_array(n, edges), centrality_array(n, moved)
        np.testing.assert_allclose(b[perm], a, atol=1e-12)


def test_adding_edge_never_lowers_harmonic():
    rng = np.random.default_rng(4)
    for _ in range(30):
        n = int(rng.integers(3, 10))
        edges = random_graph(rng, n, 0.3)
        missing = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in set(map(tuple, edges))]
        if not missing:
            continue
        extra = missing[int(rng.integers(len(missing)))]
        h0 = centrality_array(n, edges)[:, col("harmonic")]
        h1 = centrality_array(n, sorted(list(map(tuple, edges)) + [extra]))[:, col("harmonic")]
        assert (h1 >= h0 - 1e-12).all()


def two_cliques(k):
    e = [(i, j) for i in range(k) for j in range(i + 1, k)]
    e += [(i + k, j + k) for i, j in e]
    return 2 * k, e + [(k - 1, k)]


def test_greedy_two_triangles():
    n, e = two_cliques(3)
    labels = greedy_modularity(n, e)
    assert labels.tolist() == [0, 0, 0, 3, 3, 3]
    assert modularity(n, e, labels) == pytest.approx(max_modularity(n, e))


def test_greedy_edgeless_and_k4():
    assert greedy_modularity(4, []).tolist() == [0, 1, 2, 3]
    k4 = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    assert len(set(greedy_modularity(4, k4).tolist())) == 1
    assert modularity(4, k4, [0] * 4) == pytest.approx(max_modularity(4, k4))


def test_greedy_final_beats_merge_path():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = int(rng.integers(2, 12))
        edges = random_graph(rng, n, 0.35)
        labels, path = greedy_modularity(n, edges, return_path=True)
        q = modularity(n, edges, labels)
        assert all(q >= modularity(n, edges, p) - 1e-12 for p in path)


def test_lp_examples():
    labels, _, conv = label_propagation(1, [], seed=0)
    assert labels.tolist() == [0] and conv
    labels, _, _ = label_propagation(5, [(0, 1), (1, 2), (3, 4)], seed=0)
    assert set(labels[:3]).isdisjoint(labels[3:])
    n, e = two_cliques(4)
    labels, _, conv = label_propagation(n, e, seed=0)
    assert conv and is_lp_fixed_point(n, e, labels)
    assert len(set(labels[:4])) == 1 and len(set(labels[4:])) == 1
    assert labels[0] != labels[4]


def test_lp_deterministic_fixed_point():
    rng = np.random.default_rng(6)
    for _ in range(30):
        n = int(rng.integers(1, 15))
        edges = random_graph(rng, n, 0.3)
        a = label_propagation(n, edges, seed=11)
        b = label_propagation(n, edges, seed=11)
        np.testing.assert_array_equal(a[0], b[0])
        if a[2]:
            assert is_lp_fixed_point(n, edges, a[0])


def test_ordinals():
    assert community_ordinals([5, 5, 2, 9, 9, 9]).tolist() == [1, 1, 2, 0, 0, 0]
    # equal sizes: the community holding the smaller node id ranks first
    assert community_ordinals([3, 1, 3, 1]).tolist() == [0, 1, 0, 1]
    capped = community_ordinals(np.arange(40))
    assert capped.max() == C_MAX - 1 and capped[:C_MAX - 1].tolist() == list(range(C_MAX - 1))


def make_mag(n_a, n_b, pos_offset=0):
    langs = ("a", "b")
    nodes_lang = np.array([0] * n_a + [1] * n_b)
    pos = np.concatenate([np.arange(n_a), np.arange(n_b)]) + pos_offset
    words = tuple(f"w{i}" for i in range(n_a + n_b))
    edges = np.array([[i, n_a + i] for i in range(min(n_a, n_b))], dtype=np.int64).reshape(-1, 2)
    return Mag("v", langs, {"a": "source", "b": "target"}, words, nodes_lang, pos, edges,
               np.full(n_a + n_b, -1))


def test_assemble_rows_oov_and_cap():
    g = make_mag(3, 3, pos_offset=254)
    feats = GraphFeatures("v", centrality_array(6, g.edges), np.zeros(6, int), np.zeros(6, int))
    emb = EmbeddingProvider(4, "type", {("a", "w0"): np.ones(4)}, frozenset("ab"))
    t = assemble_node_features(g, feats, {"a": emb, "b": emb}, {"a": 0, "b": 1})
    assert t.numeric.shape == (6, 5 + 4 + 1) and t.categorical.shape == (6, 4)
    assert t.numeric[0, 5:9].tolist() == [1, 1, 1, 1] and t.numeric[0, 9] == 0
    assert (t.numeric[1, 5:9] == 0).all() and t.numeric[1, 9] == 1
    assert t.categorical[:, 1].tolist() == [254, 255, 255, 254, 255, 255]
    assert t.categorical[:, 0].tolist() == [0, 0, 0, 1, 1, 1]
    with pytest.raises(KeyError):
        assemble_node_features(g, feats, {"a": emb}, {"a": 0, "b": 1})
