"""Cluster-to-cluster linkage in dense and sparse-graph modes.

Everything here works on a :class:`PairGraph`: the list of point pairs whose
dissimilarity is known.  Dense mode lists every pair; sparse mode lists the
symmetrized kNN edges and charges ``missing_value`` for every other pair.

Per round the sub-cluster algorithm only needs, for every pair of clusters
that share at least one edge, the running ``(sum, count, min, max)`` of the
edge dissimilarities between them.  :class:`PairTable` holds those and is
coarsened in bulk when clusters merge, which is the vectorized form of
:func:`merged_linkage_update`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Dataset,
    Linkage,
    LinkageSpec,
    Metric,
    Partition,
    as_dataset,
    canonicalize_partition,
    default_missing_edge_value,
    dissimilarity_matrix,
)
from .neighbors import NeighborGraph


@dataclass(frozen=True)
class ClusterPairStats:
    """Edge statistics between two disjoint clusters A and B."""

    sum_dissimilarity: float
    min_dissimilarity: float
    max_dissimilarity: float
    pair_count: int
    present_edge_count: int
    target: frozenset | None = None

    def __post_init__(self):
        if self.present_edge_count > self.pair_count:
            raise ValueError("present_edge_count exceeds pair_count")


def merged_linkage_update(stats_ab: ClusterPairStats, stats_cb: ClusterPairStats) -> ClusterPairStats:
    """Stats for ``(A | C, B)`` from the stats of ``(A, B)`` and ``(C, B)``."""
    if (stats_ab.target is not None and stats_cb.target is not None
            and stats_ab.target != stats_cb.target):
        raise ValueError("stats refer to different target clusters")
    return ClusterPairStats(
        sum_dissimilarity=stats_ab.sum_dissimilarity + stats_cb.sum_dissimilarity,
        min_dissimilarity=min(stats_ab.min_dissimilarity, stats_cb.min_dissimilarity),
        max_dissimilarity=max(stats_ab.max_dissimilarity, stats_cb.max_dissimilarity),
        pair_count=stats_ab.pair_count + stats_cb.pair_count,
        present_edge_count=stats_ab.present_edge_count + stats_cb.present_edge_count,
        target=stats_ab.target if stats_ab.target is not None else stats_cb.target,
    )


def linkage_from_stats(stats: ClusterPairStats, kind, missing_value: float = 0.0) -> float:
    kind = Linkage(kind)
    missing = stats.pair_count - stats.present_edge_count
    if kind is Linkage.AVERAGE:
        return (stats.sum_dissimilarity + missing_value * missing) / stats.pair_count
    if kind is Linkage.SINGLE:
        return stats.min_dissimilarity if stats.present_edge_count else missing_value
    top = stats.max_dissimilarity if stats.present_edge_count else missing_value
    return max(top, missing_value) if missing else top


# --------------------------------------------------------------------------
# point-pair substrate


@dataclass(frozen=True, eq=False)
class PairGraph:
    """Known point-pair dissimilarities ``w[e]`` for pairs ``u[e] < v[e]``."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    n: int
    complete: bool
    missing_value: float = 0.0

    @classmethod
    def from_matrix(cls, D) -> "PairGraph":
        D = np.asarray(D, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("dissimilarity matrix must be square")
        if not np.allclose(D, D.T, rtol=0, atol=0):
            raise ValueError("dissimilarity matrix must be symmetric")
        if np.any(~np.isfinite(D)) or np.any(D < 0):
            raise ValueError("dissimilarities must be finite and non-negative")
        n = D.shape[0]
        u, v = np.triu_indices(n, 1)
        return cls(u.astype(np.int64), v.astype(np.int64), D[u, v], n, True)

    @classmethod
    def dense(cls, X, metric) -> "PairGraph":
        return cls.from_matrix(dissimilarity_matrix(X, metric))

    @classmethod
    def from_neighbor_graph(cls, g: NeighborGraph, missing_value: float | None = None,
                            points=None) -> "PairGraph":
        u, v, w = g.symmetric_edges()
        if missing_value is None:
            missing_value = default_missing_edge_value(
                g.metric, points=points, max_observed=float(w.max()) if len(w) else 0.0)
        complete = len(u) == g.n * (g.n - 1) // 2
        return cls(u, v, w, g.n, complete, float(missing_value))


def resolve_pairs(d, g=None, linkage: LinkageSpec | None = None, metric=None) -> PairGraph:
    """Build the pair substrate from whatever the caller has.

    ``g`` may be a :class:`PairGraph`, a :class:`NeighborGraph`, or ``None``
    (dense over ``d``).  ``d`` may be a :class:`Dataset`, an array of points
    or, with ``metric="precomputed"``, a square dissimilarity matrix.
    """
    linkage = linkage or LinkageSpec()
    if isinstance(g, PairGraph):
        return g
    if isinstance(g, NeighborGraph):
        pts = d.points if isinstance(d, Dataset) else (None if d is None else np.asarray(d))
        return PairGraph.from_neighbor_graph(g, linkage.missing_edge_value, points=pts)
    if g is not None:
        raise TypeError(f"unsupported graph type {type(g).__name__}")
    if metric == "precomputed":
        return PairGraph.from_matrix(d)
    return PairGraph.dense(d, Metric.SQEUCLIDEAN if metric is None else metric)


# --------------------------------------------------------------------------
# cluster-pair table


def _group_reduce(key, sums, counts, mins, maxs):
    order = np.argsort(key, kind="stable")
    key = key[order]
    if len(key) == 0:
        empty = np.zeros(0)
        return key, empty, np.zeros(0, dtype=np.int64), empty, empty
    starts = np.flatnonzero(np.concatenate(([True], key[1:] != key[:-1])))
    return (key[starts],
            np.add.reduceat(sums[order], starts),
            np.add.reduceat(counts[order], starts),
            np.minimum.reduceat(mins[order], starts),
            np.maximum.reduceat(maxs[order], starts))


class PairTable:
    """Aggregated edge statistics between clusters of one partition.

    Only cluster pairs joined by at least one known point pair are stored,
    as ``a < b`` with parallel arrays of sum, count, min and max.
    """

    def __init__(self, a, b, sums, counts, mins, maxs, sizes, missing_value, complete):
        self.a, self.b = a, b
        self.sums, self.counts, self.mins, self.maxs = sums, counts, mins, maxs
        self.sizes = sizes
        self.missing_value = missing_value
        self.complete = complete

    @property
    def num_clusters(self) -> int:
        return len(self.sizes)

    @classmethod
    def from_pairs(cls, pg: PairGraph, labels: np.ndarray) -> "PairTable":
        labels = np.asarray(labels, dtype=np.int64)
        K = int(labels.max()) + 1 if len(labels) else 0
        sizes = np.bincount(labels, minlength=K).astype(np.int64)
        ones = np.ones(len(pg.u), dtype=np.int64)
        table = cls(labels[pg.u], labels[pg.v], pg.w, ones, pg.w, pg.w, np.arange(K),
                    pg.missing_value, pg.complete)
        return table.coarsen(np.arange(K), sizes=sizes)

    def coarsen(self, new_of_old: np.ndarray, sizes: np.ndarray | None = None) -> "PairTable":
        """Relabel clusters through ``new_of_old`` and merge their stats."""
        new_of_old = np.asarray(new_of_old, dtype=np.int64)
        K = int(new_of_old.max()) + 1 if len(new_of_old) else 0
        if sizes is None:
            sizes = np.bincount(new_of_old, weights=self.sizes, minlength=K).astype(np.int64)
        a, b = new_of_old[self.a], new_of_old[self.b]
        cross = a != b
        a, b = a[cross], b[cross]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        key, sums, counts, mins, maxs = _group_reduce(
            lo * K + hi, self.sums[cross], self.counts[cross], self.mins[cross], self.maxs[cross])
        return PairTable(key // K if K else key, key % K if K else key, sums, counts, mins, maxs,
                         sizes, self.missing_value, self.complete)

    def stats(self, i: int) -> ClusterPairStats:
        return ClusterPairStats(float(self.sums[i]), float(self.mins[i]), float(self.maxs[i]),
                                int(self.sizes[self.a[i]] * self.sizes[self.b[i]]),
                                int(self.counts[i]))

    def values(self, kind) -> np.ndarray:
        """Linkage value of every stored cluster pair."""
        kind = Linkage(kind)
        m = self.missing_value
        pair_count = self.sizes[self.a] * self.sizes[self.b]
        absent = pair_count - self.counts
        if kind is Linkage.AVERAGE:
            return (self.sums + m * absent) / pair_count
        if kind is Linkage.SINGLE:
            return self.mins.astype(np.float64, copy=True)
        return np.where(absent > 0, np.maximum(self.maxs, m), self.maxs)

    def nearest(self, kind, use_missing: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Nearest other cluster of each cluster, ties to the lower id.

        Returns ``(target, value)``; target is -1 where no candidate exists.
        With ``use_missing`` (sparse mode) clusters not sharing an edge are
        candidates at ``missing_value``.
        """
        K = self.num_clusters
        val = self.values(kind)
        value = np.full(K, np.inf)
        np.minimum.at(value, self.a, val)
        np.minimum.at(value, self.b, val)
        # among the pairs attaining each cluster's minimum, keep the lowest partner id
        target = np.full(K, K, dtype=np.int64)
        hit = val == value[self.a]
        np.minimum.at(target, self.a[hit], self.b[hit])
        hit = val == value[self.b]
        np.minimum.at(target, self.b[hit], self.a[hit])
        target[target == K] = -1
        if use_missing and not self.complete and K >= 2:
            m = self.missing_value
            need = np.flatnonzero(value >= m)
            if len(need):
                degree = np.bincount(self.a, minlength=K) + np.bincount(self.b, minlength=K)
                # an isolated cluster falls back to the lowest other id
                iso = need[degree[need] == 0]
                fallback = np.where(iso == 0, 1, 0)
                better = (value[iso] > m) | (fallback < target[iso])
                target[iso[better]], value[iso[better]] = fallback[better], m
                rest = need[degree[need] > 0]
                if len(rest):
                    src = np.concatenate([self.a, self.b])
                    dst = np.concatenate([self.b, self.a])
                    order = np.lexsort((dst, src))
                    s_sorted, d_sorted = src[order], dst[order]
                    indptr = np.concatenate(([0], np.cumsum(np.bincount(s_sorted, minlength=K))))
                    for c in rest.tolist():
                        excluded = np.union1d(d_sorted[indptr[c]:indptr[c + 1]], [c])
                        gaps = np.flatnonzero(excluded != np.arange(len(excluded)))
                        t = int(gaps[0]) if len(gaps) else len(excluded)
                        if t >= K:
                            continue
                        if value[c] > m or t < target[c]:
                            target[c], value[c] = t, m
        return target, value


# --------------------------------------------------------------------------
# from-scratch evaluation


def linkage_value(a, b, d=None, g=None, l: LinkageSpec | None = None, metric=Metric.SQEUCLIDEAN) -> float:
    """Linkage between point-index sets ``a`` and ``b``, computed directly.

    In sparse mode (``g`` given) a pair counts as present if either endpoint
    lists the other; all other pairs contribute ``missing_value``.
    """
    l = l or LinkageSpec()
    a = np.unique(np.asarray(list(a), dtype=np.int64))
    b = np.unique(np.asarray(list(b), dtype=np.int64))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("linkage requires non-empty sets")
    if np.intersect1d(a, b).size:
        raise ValueError("linkage requires disjoint sets")
    if a[0] > b[0]:
        a, b = b, a  # same evaluation order either way round, so exactly symmetric
    if g is None:
        if metric == "precomputed":
            block = np.asarray(d, dtype=np.float64)[np.ix_(a, b)]
        else:
            pts = as_dataset(d).points
            block = dissimilarity_matrix(np.vstack([pts[a], pts[b]]), metric)[: len(a), len(a):]
        present = np.ones(block.shape, dtype=bool)
        missing_value = 0.0
    else:
        pg = resolve_pairs(d, g, l, metric)
        pos_a = {int(x): i for i, x in enumerate(a)}
        pos_b = {int(x): j for j, x in enumerate(b)}
        block = np.zeros((len(a), len(b)))
        present = np.zeros((len(a), len(b)), dtype=bool)
        for x, y, w in zip(pg.u.tolist(), pg.v.tolist(), pg.w.tolist()):
            if x in pos_a and y in pos_b:
                i, j = pos_a[x], pos_b[y]
            elif y in pos_a and x in pos_b:
                i, j = pos_a[y], pos_b[x]
            else:
                continue
            block[i, j] = w
            present[i, j] = True
        missing_value = pg.missing_value
        block = np.where(present, block, missing_value)
    kind = l.kind
    if kind is Linkage.AVERAGE:
        return float(block.mean())
    if kind is Linkage.SINGLE:
        return float(block[present].min()) if present.any() else float(missing_value)
    return float(block.max())


def nearest_cluster(q: int, p, g=None, l: LinkageSpec | None = None, d=None,
                    metric=Metric.SQEUCLIDEAN):
    """Cluster of ``p`` (other than ``q``) with the smallest linkage to ``q``.

    Returns ``(cluster_id, linkage)`` in canonical cluster ids, or ``None``
    when ``p`` has a single cluster.
    """
    l = l or LinkageSpec()
    p = canonicalize_partition(p)
    if not 0 <= q < p.num_clusters:
        raise ValueError(f"cluster {q} not in partition")
    if p.num_clusters < 2:
        return None
    pg = resolve_pairs(d, g, l, metric)
    table = PairTable.from_pairs(pg, p.assignment)
    target, value = table.nearest(l.kind)
    if target[q] < 0:
        return None
    return int(target[q]), float(value[q])


def partition_labels(p) -> np.ndarray:
    if isinstance(p, Partition):
        return canonicalize_partition(p).assignment
    return canonicalize_partition(Partition(p)).assignment
