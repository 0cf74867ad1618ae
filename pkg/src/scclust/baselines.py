"""Comparison algorithms: Affinity clustering and two DP-Means solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_random_state

from ._validation import check_int, check_metric, check_nonnegative, check_points
from .core import Linkage, LinkageSpec, Partition, as_dataset, canonicalize_partition
from .linkage import PairTable, resolve_pairs
from .neighbors import build_knn_graph
from .scc import RoundTrace, _TreeBuilder, _components, _unique_pairs


# --------------------------------------------------------------------------
# Affinity clustering


def run_affinity(d, g=None, l: LinkageSpec | None = None, max_rounds: int = 100,
                 metric="sqeuclidean"):
    """Boruvka-style rounds: every cluster links to its nearest cluster.

    Only clusters that share a graph edge are candidates, so the run stops
    at one cluster per connected component of the graph.  Each trace entry's
    ``threshold`` is the largest linkage merged in that round.
    """
    l = l or LinkageSpec()
    check_int(max_rounds, "max_rounds", 1)
    pg = resolve_pairs(d, g, l, metric)
    n = pg.n
    labels = np.arange(n, dtype=np.int64)
    table = PairTable.from_pairs(pg, labels)
    tree = _TreeBuilder(n)
    traces = []
    for evaluation in range(1, max_rounds + 1):
        if table.num_clusters < 2:
            break
        target, value = table.nearest(l.kind, use_missing=False)
        src = np.flatnonzero(target >= 0)
        if not len(src):
            break
        dst = target[src]
        height = float(value[src].max())
        comp = _components(table.num_clusters, src, dst)
        round_index = len(traces) + 1
        merges = tree.merge(comp, round_index, height)
        labels = comp[labels]
        table = table.coarsen(comp)
        traces.append(RoundTrace(round_index, height,
                                 Partition(labels, round_index=round_index, threshold=height),
                                 merges, len(_unique_pairs(src, dst)), evaluation))
    return traces, tree.build()


# --------------------------------------------------------------------------
# DP-Means


@dataclass(frozen=True)
class DpMeansParams:
    lam: float
    max_iterations: int = 100
    seed: int = 0

    def __post_init__(self):
        check_nonnegative(self.lam, "lambda")
        check_int(self.max_iterations, "max_iterations", 1)


def cluster_means(X: np.ndarray, labels: np.ndarray, K: int | None = None) -> np.ndarray:
    K = int(labels.max()) + 1 if K is None else K
    counts = np.bincount(labels, minlength=K).astype(np.float64)
    sums = np.zeros((K, X.shape[1]))
    np.add.at(sums, labels, X)
    return sums / counts[:, None]


def within_cluster_sse(X, labels) -> float:
    labels = canonicalize_partition(labels).assignment
    means = cluster_means(X, labels)
    return float(np.sum((X - means[labels]) ** 2))


def dp_means_cost(d, p, lam: float) -> float:
    """Squared distances to cluster means plus ``lam`` per cluster."""
    X = as_dataset(d).points
    p = canonicalize_partition(p)
    if p.n != X.shape[0]:
        raise ValueError("partition and dataset sizes differ")
    return within_cluster_sse(X, p.assignment) + lam * p.num_clusters


def _sq_to_centers(x, centers, center_sq):
    return np.maximum(center_sq - 2.0 * centers @ x + x @ x, 0.0)


def run_serial_dp_means(d, params: DpMeansParams, return_history: bool = False):
    """Classic serial DP-Means.

    Points are visited in a seeded random order.  A point joins its nearest
    center when the squared distance is at most ``lam`` and otherwise opens
    a cluster at itself; centers are reset to means after every pass.
    """
    X = as_dataset(d).points
    if not params.lam > 0:
        raise ValueError("lambda must be positive")
    n, dim = X.shape
    rng = np.random.default_rng(params.seed)
    order = rng.permutation(n)
    labels = np.full(n, -1, dtype=np.int64)
    centers = np.empty((0, dim))
    history = []
    for _ in range(params.max_iterations):
        prev = labels.copy()
        buf = np.empty((n + len(centers), dim))
        buf[: len(centers)] = centers
        sq = np.empty(len(buf))
        sq[: len(centers)] = np.einsum("ij,ij->i", centers, centers)
        K = len(centers)
        for i in order:
            x = X[i]
            if K:
                dist = _sq_to_centers(x, buf[:K], sq[:K])
                j = int(np.argmin(dist))
                if dist[j] <= params.lam:
                    labels[i] = j
                    continue
            buf[K] = x
            sq[K] = x @ x
            labels[i] = K
            K += 1
        labels = canonicalize_partition(labels).assignment.copy()
        centers = cluster_means(X, labels)
        history.append(within_cluster_sse(X, labels) + params.lam * len(centers))
        if np.array_equal(prev, labels):
            break
    part = Partition(labels)
    if return_history:
        return part, centers, history
    return part, centers


def run_dp_means_pp(d, params: DpMeansParams):
    """DP-Means++ seeding.

    The first center is uniform.  Further centers are drawn with probability
    proportional to the squared distance to the nearest center, restricted
    to points farther than ``lam``; seeding stops when no such point is left.
    Every point is then assigned to its nearest center.
    """
    X = as_dataset(d).points
    if not params.lam > 0:
        raise ValueError("lambda must be positive")
    n = X.shape[0]
    rng = np.random.default_rng(params.seed)
    first = int(rng.integers(n))
    d2 = np.sum((X - X[first]) ** 2, axis=1)
    assign = np.zeros(n, dtype=np.int64)
    K = 1
    while True:
        weights = np.where(d2 > params.lam, d2, 0.0)
        total = weights.sum()
        if total <= 0:
            break
        cum = np.cumsum(weights)
        pick = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        pick = min(pick, n - 1)
        new = np.sum((X - X[pick]) ** 2, axis=1)
        closer = new < d2
        assign[closer] = K
        d2 = np.where(closer, new, d2)
        K += 1
    labels = canonicalize_partition(assign).assignment.copy()
    return Partition(labels), cluster_means(X, labels)


# --------------------------------------------------------------------------
# estimators


class Affinity(ClusterMixin, BaseEstimator):
    """Affinity clustering on a kNN graph (``n_neighbors=None``: all pairs)."""

    def __init__(self, metric="sqeuclidean", linkage="average", n_neighbors=25,
                 max_rounds=100, n_jobs=None):
        self.metric = metric
        self.linkage = linkage
        self.n_neighbors = n_neighbors
        self.max_rounds = max_rounds
        self.n_jobs = n_jobs

    def fit(self, X, y=None, graph=None):
        from .scc import rounds_to_partitions

        metric = check_metric(self.metric)
        X = check_points(X, metric)
        n = X.shape[0]
        spec = LinkageSpec(Linkage(self.linkage))
        if n > 1 and graph is None and self.n_neighbors is not None:
            k = min(check_int(self.n_neighbors, "n_neighbors", 1), n - 1)
            graph = build_knn_graph(X, k, metric, n_jobs=self.n_jobs)
        self.graph_ = graph
        self.rounds_, self.dendrogram_ = run_affinity(X, graph, spec, self.max_rounds, metric)
        self.partitions_ = rounds_to_partitions(self.rounds_, n)
        self.labels_ = self.partitions_[-1].assignment.copy()
        self.n_features_in_ = X.shape[1]
        return self


class SerialDPMeans(ClusterMixin, BaseEstimator):
    def __init__(self, lam=1.0, max_iter=100, random_state=0):
        self.lam = lam
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_points(X)
        seed = _seed(self.random_state)
        part, self.cluster_centers_, self.cost_history_ = run_serial_dp_means(
            X, DpMeansParams(check_nonnegative(self.lam, "lam", strict=True), self.max_iter, seed),
            return_history=True)
        self.labels_ = part.assignment.copy()
        self.n_iter_ = len(self.cost_history_)
        self.cost_ = self.cost_history_[-1]
        return self


class DPMeansPlusPlus(ClusterMixin, BaseEstimator):
    def __init__(self, lam=1.0, random_state=0):
        self.lam = lam
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_points(X)
        part, self.cluster_centers_ = run_dp_means_pp(
            X, DpMeansParams(check_nonnegative(self.lam, "lam", strict=True), 1,
                             _seed(self.random_state)))
        self.labels_ = part.assignment.copy()
        self.cost_ = dp_means_cost(X, part, self.lam)
        return self


def _seed(random_state) -> int:
    if isinstance(random_state, (int, np.integer)):
        return int(random_state)
    return int(check_random_state(random_state).randint(0, 2**31 - 1))
