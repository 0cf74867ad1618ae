"""Sub-Cluster Component (SCC) agglomerative clustering.

Each round links every cluster to its nearest other cluster when their
linkage is within the round threshold, then merges the connected
components of those links.  Thresholds increase over the rounds; the union
of all round partitions is the hierarchy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int, check_metric, check_points
from .core import (
    Dendrogram,
    Linkage,
    LinkageSpec,
    Partition,
    ThresholdSchedule,
)
from .linkage import PairGraph, PairTable, partition_labels, resolve_pairs
from .neighbors import NeighborGraph, build_knn_graph

FIXPOINT = "fixpoint-per-threshold"
ONE_ROUND = "one-round-per-threshold"
_MODE_ALIASES = {"fixpoint": FIXPOINT, FIXPOINT: FIXPOINT,
                 "one-round": ONE_ROUND, ONE_ROUND: ONE_ROUND}


class RoundLimitExceeded(RuntimeError):
    """Raised when a run needs more rounds than ``max_rounds`` allows."""


@dataclass(frozen=True)
class SccConfig:
    schedule: ThresholdSchedule
    linkage: LinkageSpec = field(default_factory=LinkageSpec)
    mode: str = FIXPOINT
    max_rounds: int | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", _MODE_ALIASES[self.mode])
        except KeyError:
            raise ValueError(f"unknown mode {self.mode!r}") from None
        if not isinstance(self.schedule, ThresholdSchedule):
            object.__setattr__(self, "schedule", ThresholdSchedule.explicit(self.schedule))

    def round_cap(self, n: int) -> int:
        """Default cap: N-1 merging rounds plus one idle round per threshold, doubled."""
        if self.max_rounds is not None:
            return self.max_rounds
        return 2 * max(n - 1, 0) + self.schedule.L


@dataclass(frozen=True, eq=False)
class RoundTrace:
    round_index: int
    threshold: float
    partition: Partition
    merges: list
    edge_count: int
    evaluation: int = 0

    @property
    def num_clusters(self) -> int:
        return self.partition.num_clusters


# --------------------------------------------------------------------------
# one round


def _components(K: int, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Component id of each cluster, numbered by smallest member id."""
    if K == 0:
        return np.zeros(0, dtype=np.int64)
    graph = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(K, K))
    _, comp = connected_components(graph, directed=True, connection="weak")
    first = np.full(comp.max() + 1, K, dtype=np.int64)
    np.minimum.at(first, comp, np.arange(K))
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[comp]


def _round_edges(table: PairTable, kind, tau: float) -> tuple[np.ndarray, np.ndarray]:
    target, value = table.nearest(kind)
    sel = np.flatnonzero((target >= 0) & (value <= tau))
    return sel, target[sel]


def _unique_pairs(src, dst) -> set[tuple[int, int]]:
    return {(min(a, b), max(a, b)) for a, b in zip(src.tolist(), dst.tolist())}


def sub_cluster_edges(p, tau: float, l: LinkageSpec | None = None, g=None, d=None,
                      metric="sqeuclidean") -> set[tuple[int, int]]:
    """Undirected cluster pairs that are nearest neighbors within ``tau``.

    ``{A, B}`` is returned when ``linkage(A, B) <= tau`` and B is A's nearest
    cluster or A is B's.  Cluster ids are canonical ids of ``p``.
    """
    l = l or LinkageSpec()
    if tau <= 0:
        raise ValueError("tau must be positive")
    labels = partition_labels(p)
    table = PairTable.from_pairs(resolve_pairs(d, g, l, metric), labels)
    src, dst = _round_edges(table, l.kind, tau)
    return _unique_pairs(src, dst)


def merge_components(p, edges) -> Partition:
    """Merge the clusters of ``p`` along ``edges`` (connected components)."""
    labels = partition_labels(p)
    K = int(labels.max()) + 1 if len(labels) else 0
    edges = list(edges)
    src = np.array([e[0] for e in edges], dtype=np.int64)
    dst = np.array([e[1] for e in edges], dtype=np.int64)
    if len(edges) and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= K):
        raise ValueError("edge references a cluster id outside the partition")
    comp = _components(K, src, dst)
    return Partition(comp[labels])


# --------------------------------------------------------------------------
# full run


class _TreeBuilder:
    def __init__(self, n: int):
        self.n = n
        self.node_of = np.arange(n, dtype=np.int64)
        self.children: list[tuple[int, ...]] = []
        self.rounds: list[int] = []
        self.thresholds: list[float] = []

    def merge(self, comp: np.ndarray, round_index: int, tau: float) -> list:
        K_new = int(comp.max()) + 1
        order = np.argsort(comp, kind="stable")
        bounds = np.flatnonzero(np.diff(comp[order])) + 1
        groups = np.split(order, bounds)
        new_node_of = np.empty(K_new, dtype=np.int64)
        merges = []
        for cid, members in enumerate(groups):
            if len(members) == 1:
                new_node_of[cid] = self.node_of[members[0]]
                continue
            node = self.n + len(self.children)
            self.children.append(tuple(self.node_of[members].tolist()))
            self.rounds.append(round_index)
            self.thresholds.append(tau)
            new_node_of[cid] = node
            merges.append((tuple(members.tolist()), cid))
        self.node_of = new_node_of
        return merges

    def build(self) -> Dendrogram:
        return Dendrogram(self.n, self.children, self.rounds, self.thresholds)


def run_scc(d, cfg: SccConfig, g=None, metric="sqeuclidean", return_evaluations: bool = False):
    """Run SCC from the singleton partition.

    ``g`` is the pair substrate: ``None`` for dense linkage over ``d``, a
    :class:`NeighborGraph` for sparse linkage, or a prepared
    :class:`PairGraph`.  Returns ``(traces, dendrogram)``; the trace holds
    one entry per round that changed the partition.
    """
    pg = resolve_pairs(d, g, cfg.linkage, metric)
    n = pg.n
    thresholds = cfg.schedule.values.tolist()
    L = len(thresholds)
    cap = cfg.round_cap(n)
    labels = np.arange(n, dtype=np.int64)
    table = PairTable.from_pairs(pg, labels)
    tree = _TreeBuilder(n)
    traces: list[RoundTrace] = []
    kind = cfg.linkage.kind
    idx = 0
    evaluations = 0
    while idx < L and table.num_clusters > 1:
        if evaluations >= cap:
            raise RoundLimitExceeded(
                f"exceeded max_rounds={cap} at threshold index {idx} of {L}")
        tau = thresholds[idx]
        evaluations += 1
        src, dst = _round_edges(table, kind, tau)
        if len(src):
            comp = _components(table.num_clusters, src, dst)
            round_index = len(traces) + 1
            merges = tree.merge(comp, round_index, tau)
            labels = comp[labels]
            table = table.coarsen(comp)
            traces.append(RoundTrace(round_index, tau,
                                     Partition(labels, round_index=round_index, threshold=tau),
                                     merges, len(_unique_pairs(src, dst)), evaluations))
        if cfg.mode == ONE_ROUND or not len(src):
            idx += 1
    dendrogram = tree.build()
    if return_evaluations:
        return traces, dendrogram, evaluations
    return traces, dendrogram


def rounds_to_partitions(traces, n: int | None = None) -> list[Partition]:
    """Distinct round partitions in order, starting with singletons."""
    traces = list(traces)
    if n is None:
        if not traces:
            raise ValueError("cannot infer the number of points from an empty trace")
        n = traces[0].partition.n
    out = [Partition.singletons(n)]
    for t in traces:
        if not t.partition.same_clustering(out[-1]):
            out.append(t.partition)
    return out


# --------------------------------------------------------------------------
# estimator


def make_schedule(schedule, tau0=None, tau_max=None, n_thresholds=200, pg: PairGraph | None = None):
    """Resolve the estimator's schedule parameters to a ThresholdSchedule.

    Missing ends of a ``geometric`` or ``linear`` ramp default to the
    smallest positive and the largest dissimilarity the substrate can
    produce.
    """
    if isinstance(schedule, ThresholdSchedule):
        return schedule
    if not isinstance(schedule, str):
        return ThresholdSchedule.explicit(schedule)
    if schedule == "doubling":
        if tau0 is None:
            tau0 = _min_positive(pg)
        return ThresholdSchedule.geometric(tau0, n_thresholds)
    if schedule not in ("geometric", "linear"):
        raise ValueError(f"unknown schedule {schedule!r}")
    if tau0 is None:
        tau0 = _min_positive(pg)
    if tau_max is None:
        tau_max = float(pg.w.max()) if len(pg.w) else tau0
        if not pg.complete:
            tau_max = max(tau_max, pg.missing_value)
        tau_max = max(tau_max, tau0 * (1 + 1e-9))
    if schedule == "geometric":
        return ThresholdSchedule.geometric(tau0, n_thresholds, tau_max=tau_max)
    return ThresholdSchedule.linear(tau0, tau_max, n_thresholds)


def _min_positive(pg) -> float:
    if pg is None:
        raise ValueError("tau0 is required")
    pos = pg.w[pg.w > 0]
    return float(pos.min()) if len(pos) else 1.0


class SCC(ClusterMixin, BaseEstimator):
    """Sub-Cluster Component hierarchical clustering.

    Parameters
    ----------
    metric : {"sqeuclidean", "euclidean", "cosine", "precomputed"}
        Point dissimilarity.  With ``"precomputed"``, ``X`` is a square
        dissimilarity matrix.
    linkage : {"average", "single", "complete"}
    n_neighbors : int or None
        Size of the kNN graph used for sparse linkage.  ``None`` evaluates
        linkage over all point pairs.
    missing_edge_value : float or None
        Dissimilarity charged for pairs absent from the kNN graph.
    schedule : {"geometric", "linear", "doubling"} or array-like
        Threshold schedule; an array is used as given.
    tau0, tau_max : float or None
        Ends of the threshold ramp; ``None`` derives them from the data.
    n_thresholds : int
        Number of thresholds in a generated schedule.
    mode : {"fixpoint", "one-round"}
        ``"fixpoint"`` repeats a threshold until nothing merges;
        ``"one-round"`` advances after every round.
    max_rounds : int or None
        Safety cap on evaluated rounds.
    n_jobs : int or None
        Threads for kNN graph construction.  Output does not depend on it.

    Attributes
    ----------
    rounds_ : list of RoundTrace
    partitions_ : list of Partition
        All distinct round partitions, singletons first.
    dendrogram_ : Dendrogram
    labels_ : ndarray of shape (n_samples,)
        Cluster ids of the last round.
    schedule_ : ThresholdSchedule
    n_rounds_ : int
        Rounds evaluated, including those that merged nothing.
    """

    def __init__(self, metric="sqeuclidean", linkage="average", n_neighbors=None,
                 missing_edge_value=None, schedule="geometric", tau0=None, tau_max=None,
                 n_thresholds=200, mode="fixpoint", max_rounds=None, n_jobs=None):
        self.metric = metric
        self.linkage = linkage
        self.n_neighbors = n_neighbors
        self.missing_edge_value = missing_edge_value
        self.schedule = schedule
        self.tau0 = tau0
        self.tau_max = tau_max
        self.n_thresholds = n_thresholds
        self.mode = mode
        self.max_rounds = max_rounds
        self.n_jobs = n_jobs

    def _pair_graph(self, X, graph):
        metric = check_metric(self.metric)
        sparse = graph is not None or self.n_neighbors is not None
        spec = LinkageSpec(Linkage(self.linkage), "sparse-graph" if sparse else "dense",
                           self.missing_edge_value)
        if sparse:
            if metric == "precomputed" and graph is None:
                raise ValueError("n_neighbors is not supported with precomputed dissimilarities")
            if graph is None:
                k = check_int(self.n_neighbors, "n_neighbors", 1, X.shape[0] - 1)
                graph = build_knn_graph(X, k, metric, n_jobs=self.n_jobs)
            pg = resolve_pairs(X, graph, spec, metric)
        else:
            pg = resolve_pairs(X, None, spec, metric)
        return spec, pg, graph

    def fit(self, X, y=None, graph: NeighborGraph | None = None):
        """Cluster ``X``.  ``graph`` reuses a previously built kNN graph."""
        metric = check_metric(self.metric)
        X = check_points(X, metric)
        n = X.shape[0]
        check_int(self.n_thresholds, "n_thresholds", 1)
        check_int(self.max_rounds, "max_rounds", 1, allow_none=True)
        if n == 1:
            spec = LinkageSpec(Linkage(self.linkage))
            pg = PairGraph(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0), 1, True)
        else:
            spec, pg, graph = self._pair_graph(X, graph)
        self.graph_ = graph
        self.schedule_ = make_schedule(self.schedule, self.tau0, self.tau_max,
                                       self.n_thresholds, pg)
        cfg = SccConfig(self.schedule_, spec, self.mode, self.max_rounds)
        self.rounds_, self.dendrogram_, self.n_rounds_ = run_scc(
            None, cfg, pg, return_evaluations=True)
        self.partitions_ = rounds_to_partitions(self.rounds_, n)
        self.labels_ = self.partitions_[-1].assignment.copy()
        self.n_features_in_ = X.shape[1]
        return self

    def partition_for_k(self, k: int) -> Partition:
        """Round partition whose cluster count is closest to ``k``."""
        from .evaluation import select_round_by_k

        check_is_fitted(self, "partitions_")
        return select_round_by_k(self.partitions_, k)

    def partition_for_lambda(self, X, lam: float) -> tuple[Partition, float]:
        """Round partition with the lowest DP-Means cost at penalty ``lam``."""
        from .evaluation import select_round_by_dp_cost

        check_is_fitted(self, "partitions_")
        return select_round_by_dp_cost(self.partitions_, X, lam)
