import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scclust.core import LinkageSpec
from scclust.linkage import (
    ClusterPairStats,
    PairGraph,
    PairTable,
    linkage_from_stats,
    linkage_value,
    merged_linkage_update,
)
from scclust.neighbors import build_knn_graph

LINKAGES = ["average", "single", "complete"]
METRICS = ["sqeuclidean", "euclidean", "cosine"]


def _three_sets(rng, n):
    perm = rng.permutation(n)
    cuts = np.sort(rng.choice(np.arange(1, n), size=2, replace=False))
    return perm[: cuts[0]], perm[cuts[0]: cuts[1]], perm[cuts[1]:]


def test_examples():
    X = np.array([[0.0], [0.2], [1.0]])
    assert linkage_value([0], [2], X) == pytest.approx(1.0)
    assert linkage_value([0, 1], [2], X, l=LinkageSpec("average")) == pytest.approx(0.82)
    assert linkage_value([0, 1], [2], X, l=LinkageSpec("single")) == pytest.approx(0.64)
    assert linkage_value([0, 1], [2], X, l=LinkageSpec("complete")) == pytest.approx(1.0)


def test_errors():
    X = np.zeros((3, 1))
    with pytest.raises(ValueError):
        linkage_value([0, 1], [1, 2], X)
    with pytest.raises(ValueError):
        linkage_value([], [1], X)


def test_merged_update_examples():
    ab = ClusterPairStats(2.0, 0.3, 1.5, 2, 2)
    cb = ClusterPairStats(1.0, 0.1, 1.0, 1, 1)
    m = merged_linkage_update(ab, cb)
    assert m.sum_dissimilarity == 3.0 and m.pair_count == 3
    assert m.min_dissimilarity == 0.1 and m.max_dissimilarity == 1.5
    with pytest.raises(ValueError):
        merged_linkage_update(ClusterPairStats(1, 1, 1, 1, 1, frozenset({5})),
                              ClusterPairStats(1, 1, 1, 1, 1, frozenset({6})))
    with pytest.raises(ValueError):
        ClusterPairStats(1.0, 1.0, 1.0, 1, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 24), st.sampled_from(LINKAGES), st.sampled_from(METRICS), st.integers(0, 2**31))
def test_symmetry_and_sparse_dense_agreement(n, kind, metric, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3)) + 0.5
    a, b, _ = _three_sets(rng, n)
    l = LinkageSpec(kind)
    dense = linkage_value(a, b, X, l=l, metric=metric)
    assert dense == linkage_value(b, a, X, l=l, metric=metric)
    g = build_knn_graph(X, n - 1, metric)
    sparse = linkage_value(a, b, X, g=g, l=LinkageSpec(kind, "sparse-graph", 123.0), metric=metric)
    assert sparse == pytest.approx(dense, rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 30), st.integers(1, 4), st.sampled_from(LINKAGES), st.integers(0, 2**31))
def test_sparse_symmetry_with_missing_pairs(n, k, kind, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    g = build_knn_graph(X, min(k, n - 1), "sqeuclidean")
    a, b, _ = _three_sets(rng, n)
    l = LinkageSpec(kind, "sparse-graph", 9.0)
    assert linkage_value(a, b, X, g=g, l=l) == linkage_value(b, a, X, g=g, l=l)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 30), st.sampled_from(LINKAGES), st.booleans(), st.integers(0, 2**31))
def test_incremental_matches_from_scratch(n, kind, sparse, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    g = build_knn_graph(X, 2, "sqeuclidean") if sparse else None
    spec = LinkageSpec(kind, "sparse-graph" if sparse else "dense", 5.0)
    pg = PairGraph.from_neighbor_graph(g, 5.0) if sparse else PairGraph.dense(X, "sqeuclidean")
    labels = rng.integers(0, 5, size=n)
    labels = np.unique(labels, return_inverse=True)[1]
    table = PairTable.from_pairs(pg, labels)
    K = table.num_clusters
    # coarsen by a random grouping of clusters, then compare every pair to from-scratch values
    group = np.unique(rng.integers(0, max(2, K - 1), size=K), return_inverse=True)[1]
    coarse = table.coarsen(group)
    new_labels = group[labels]
    vals = dict(zip(zip(coarse.a.tolist(), coarse.b.tolist()), coarse.values(kind).tolist()))
    for i in range(coarse.num_clusters):
        for j in range(i + 1, coarse.num_clusters):
            ref = linkage_value(np.flatnonzero(new_labels == i), np.flatnonzero(new_labels == j),
                                X, g=g, l=spec)
            got = vals.get((i, j), 5.0)
            assert got == pytest.approx(ref, rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 2**31))
def test_merged_update_equals_recomputation(na, nb, seed):
    rng = np.random.default_rng(seed)
    n = na + nb + 3
    X = rng.normal(size=(n, 2))
    A, C, B = np.arange(na), np.arange(na, na + nb), np.arange(na + nb, n)
    D = ((X[:, None] - X[None]) ** 2).sum(-1)

    def stats(P, Q):
        blk = D[np.ix_(P, Q)]
        return ClusterPairStats(blk.sum(), blk.min(), blk.max(), blk.size, blk.size)

    merged = merged_linkage_update(stats(A, B), stats(C, B))
    AC = np.concatenate([A, C])
    for kind in LINKAGES:
        ref = linkage_value(AC, B, X, l=LinkageSpec(kind))
        assert linkage_from_stats(merged, kind) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 64), st.sampled_from(LINKAGES), st.sampled_from(METRICS), st.integers(0, 2**31))
def test_reducibility(n, kind, metric, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3)) + 0.3
    A, B, C = _three_sets(rng, n)
    l = LinkageSpec(kind)
    dab = linkage_value(A, B, X, l=l, metric=metric)
    dac = linkage_value(A, C, X, l=l, metric=metric)
    dbc = linkage_value(B, C, X, l=l, metric=metric)
    if dab <= min(dac, dbc):
        assert min(dac, dbc) <= linkage_value(np.concatenate([A, B]), C, X, l=l, metric=metric) + 1e-12


def test_missing_pairs_use_constant():
    X = np.array([[0.0], [0.1], [5.0], [5.1]])
    g = build_knn_graph(X, 1, "sqeuclidean")
    l = LinkageSpec("average", "sparse-graph", 4.0)
    assert linkage_value([0, 1], [2, 3], X, g=g, l=l) == 4.0
    # one present pair (1,2) of squared distance 24.01 when k=2
    g2 = build_knn_graph(X, 2, "sqeuclidean")
    val = linkage_value([0], [2], X, g=g2, l=l)
    present = any(2 in row for row in g2.indices[:1].tolist()) or 0 in g2.indices[2].tolist()
    assert val == (25.0 if present else 4.0)
