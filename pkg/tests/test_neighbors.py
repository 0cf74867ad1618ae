import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_knn
from scclust.core import LinkageSpec, Partition
from scclust.linkage import PairGraph, nearest_cluster
from scclust.neighbors import NeighborGraph, build_knn_graph, default_workers


def test_line_examples():
    X = np.array([[0.0], [1.0], [3.0]])
    g = build_knn_graph(X, 1, "euclidean")
    assert g.adjacency() == [[(1, 1.0)], [(0, 1.0)], [(1, 2.0)]]
    g2 = build_knn_graph(X, 2, "euclidean")
    assert g2.adjacency()[0] == [(1, 1.0), (2, 3.0)]
    assert all(len(row) == 2 for row in g2.adjacency())


def test_complete_graph_matches_matrix(rng):
    from scclust.core import dissimilarity_matrix

    X = rng.normal(size=(12, 3))
    g = build_knn_graph(X, 11, "sqeuclidean")
    D = dissimilarity_matrix(X, "sqeuclidean")
    for i in range(12):
        assert sorted(g.indices[i].tolist()) == [j for j in range(12) if j != i]
        assert np.array_equal(g.distances[i], D[i, g.indices[i]])


def test_ties_go_to_lower_index():
    X = np.array([[0.0], [1.0], [-1.0], [2.0]])
    g = build_knn_graph(X, 2, "sqeuclidean")
    assert g.indices[0].tolist() == [1, 2]
    X = np.zeros((5, 2))
    g = build_knn_graph(X, 3, "euclidean")
    assert g.indices[4].tolist() == [0, 1, 2]
    assert g.indices[0].tolist() == [1, 2, 3]


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(1, 5), st.sampled_from(["sqeuclidean", "euclidean", "cosine"]),
       st.integers(0, 2**31))
def test_matches_brute_force(n, dim, metric, seed):
    X = np.random.default_rng(seed).normal(size=(n, dim))
    k = min(n - 1, 1 + seed % 7)
    g = build_knn_graph(X, k, metric)
    idx, dist = brute_knn(X, k, metric)
    assert np.array_equal(g.indices, idx)
    assert np.allclose(g.distances, dist, rtol=1e-10, atol=1e-12)
    # invariants: no self edges, sorted ascending
    assert not np.any(g.indices == np.arange(n)[:, None])
    assert np.all(np.diff(g.distances, axis=1) >= 0)


def test_monotone_k_prefix(rng):
    X = rng.normal(size=(40, 4))
    g5 = build_knn_graph(X, 5, "euclidean")
    g6 = build_knn_graph(X, 6, "euclidean")
    assert np.array_equal(g6.prefix(5).indices, g5.indices)
    assert np.array_equal(g6.prefix(5).distances, g5.distances)


def test_worker_count_does_not_change_output(rng):
    X = rng.normal(size=(300, 5))
    ref = build_knn_graph(X, 7, "cosine", n_jobs=1, block=32)
    for w in (2, 4, 16):
        g = build_knn_graph(X, 7, "cosine", n_jobs=w, block=32)
        assert g.indices.tobytes() == ref.indices.tobytes()
        assert g.distances.tobytes() == ref.distances.tobytes()


def test_k_range_errors(rng):
    X = rng.normal(size=(5, 2))
    with pytest.raises(ValueError):
        build_knn_graph(X, 0)
    with pytest.raises(ValueError):
        build_knn_graph(X, 5)
    with pytest.raises(ValueError):
        build_knn_graph(X[:1], 1)


def test_jsonl_roundtrip(rng, tmp_path):
    X = rng.normal(size=(20, 3))
    g = build_knn_graph(X, 4, "euclidean")
    path = tmp_path / "g.jsonl"
    text = g.to_jsonl(path, header={"config_digest": "abc"})
    assert text.splitlines()[0].startswith('{"_meta"')
    back = NeighborGraph.from_jsonl(path)
    assert np.array_equal(back.indices, g.indices)
    assert np.array_equal(back.distances, g.distances)
    assert back.metric == g.metric


def test_symmetric_edges_union(rng):
    X = np.array([[0.0], [1.0], [10.0]])
    g = build_knn_graph(X, 1, "sqeuclidean")
    u, v, w = g.symmetric_edges()
    assert sorted(zip(u.tolist(), v.tolist())) == [(0, 1), (1, 2)]


def test_env_worker_default(monkeypatch):
    monkeypatch.setenv("SCCLUST_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.delenv("SCCLUST_WORKERS")
    assert default_workers() == 1
    monkeypatch.setenv("SCCLUST_WORKERS", "0")
    with pytest.raises(ValueError):
        default_workers()


def test_nearest_cluster_examples():
    X = np.array([[0.0], [0.1], [1.0]])
    c, v = nearest_cluster(0, Partition.singletons(3), d=X, l=LinkageSpec("average"),
                           metric="sqeuclidean")
    assert c == 1 and v == pytest.approx(0.01)
    p = Partition([0, 0, 1])
    c, v = nearest_cluster(0, p, d=X, metric="sqeuclidean")
    assert c == 1 and v == pytest.approx((1.0 + 0.81) / 2)
    assert nearest_cluster(0, Partition([0, 0, 0]), d=X) is None


def test_nearest_cluster_sparse_fallback():
    # two far-apart pairs; with k=1 clusters {0,1} and {2,3} share no edge
    X = np.array([[0.0], [0.1], [5.0], [5.1]])
    g = build_knn_graph(X, 1, "sqeuclidean")
    pg = PairGraph.from_neighbor_graph(g, missing_value=7.0)
    p = Partition([0, 0, 1, 1])
    assert nearest_cluster(1, p, g=pg, l=LinkageSpec("average", "sparse-graph", 7.0)) == (0, 7.0)
    p3 = Partition([0, 0, 1, 2])
    # cluster 0 has no edge to 1 or 2: lowest other id at the missing value
    assert nearest_cluster(0, p3, g=pg, l=LinkageSpec("single", "sparse-graph", 7.0)) == (1, 7.0)
