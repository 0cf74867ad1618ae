"""Domain types shared by every algorithm in the package.

Points, partitions, dendrograms, threshold schedules and linkage settings
live here, together with the point-level dissimilarity functions.  All
dissimilarities are oriented "smaller is closer"; cosine similarity ``s``
is carried as ``1 - s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class Metric(str, Enum):
    SQEUCLIDEAN = "sqeuclidean"
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"

    @property
    def direction(self) -> str:
        return "dissimilarity"

    @classmethod
    def coerce(cls, value) -> "Metric":
        if isinstance(value, Metric):
            return value
        aliases = {
            "squared-euclidean": cls.SQEUCLIDEAN,
            "sqeuclidean": cls.SQEUCLIDEAN,
            "l2sq": cls.SQEUCLIDEAN,
            "euclidean": cls.EUCLIDEAN,
            "l2": cls.EUCLIDEAN,
            "cosine": cls.COSINE,
            "cosine-dissimilarity": cls.COSINE,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown metric {value!r}") from None


class Linkage(str, Enum):
    AVERAGE = "average"
    SINGLE = "single"
    COMPLETE = "complete"


@dataclass(frozen=True)
class LinkageSpec:
    """How cluster-to-cluster dissimilarity is computed.

    ``missing_edge_value`` is the dissimilarity assumed for point pairs that
    have no edge in a sparse neighbor graph.  ``None`` means "pick the
    default for the metric" (see :func:`default_missing_edge_value`).
    """

    kind: Linkage = Linkage.AVERAGE
    evaluation: str = "dense"
    missing_edge_value: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Linkage(self.kind))
        if self.evaluation not in ("dense", "sparse-graph"):
            raise ValueError(f"unknown linkage evaluation {self.evaluation!r}")
        if self.missing_edge_value is not None:
            v = float(self.missing_edge_value)
            if not math.isfinite(v) or v < 0:
                raise ValueError("missing_edge_value must be finite and >= 0")
            object.__setattr__(self, "missing_edge_value", v)


def default_missing_edge_value(metric, points=None, max_observed=None) -> float:
    """Constant used for absent kNN edges.

    4.0 for squared euclidean on unit-norm rows (the diameter of the unit
    sphere in those units), 1.0 for cosine dissimilarity (similarity 0),
    otherwise twice the largest observed edge.
    """
    metric = Metric.coerce(metric)
    if metric is Metric.COSINE:
        return 1.0
    if metric is Metric.SQEUCLIDEAN and points is not None:
        norms = np.linalg.norm(np.asarray(points, dtype=np.float64), axis=1)
        if np.allclose(norms, 1.0, atol=1e-6):
            return 4.0
    if max_observed is None:
        raise ValueError("max_observed is required for this metric")
    return 2.0 * float(max_observed)


# --------------------------------------------------------------------------
# datasets


@dataclass(frozen=True, eq=False)
class Dataset:
    """Dense N x D matrix of float64 points with optional integer labels."""

    points: np.ndarray
    labels: np.ndarray | None = None
    ids: tuple = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must be a non-empty 2-D array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain NaN or Inf")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        n = pts.shape[0]
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (n,):
                raise ValueError(f"expected {n} labels, got shape {lab.shape}")
            if lab.size and (not np.issubdtype(lab.dtype, np.integer) or lab.min() < 0):
                if np.issubdtype(lab.dtype, np.floating) and np.all(lab == np.round(lab)) and lab.min() >= 0:
                    lab = lab.astype(np.int64)
                else:
                    raise ValueError("labels must be non-negative integers")
            lab = lab.astype(np.int64)
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)
        ids = tuple(range(n)) if self.ids is None else tuple(self.ids)
        if len(ids) != n:
            raise ValueError(f"expected {n} ids, got {len(ids)}")
        if len(set(ids)) != n:
            raise ValueError("ids must be unique")
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


def as_dataset(X) -> Dataset:
    return X if isinstance(X, Dataset) else Dataset(X)


# --------------------------------------------------------------------------
# dissimilarities


def pairwise_dissimilarity(a, b, metric) -> float:
    """Dissimilarity between two vectors under ``metric``."""
    metric = Metric.coerce(metric)
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite entries")
    if metric is Metric.COSINE:
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0 or nb == 0:
            raise ValueError("cosine dissimilarity is undefined for zero vectors")
        return float(max(0.0, 1.0 - np.sum((a / na) * (b / nb))))
    sq = float(np.sum((a - b) ** 2))
    return sq if metric is Metric.SQEUCLIDEAN else math.sqrt(sq)


def _prepare(points: np.ndarray, metric: Metric) -> np.ndarray:
    if metric is Metric.COSINE:
        norms = np.linalg.norm(points, axis=1)
        if np.any(norms == 0):
            raise ValueError("cosine dissimilarity is undefined for zero vectors")
        return points / norms[:, None]
    return points


def _block_dissimilarity(Q: np.ndarray, P: np.ndarray, metric: Metric) -> np.ndarray:
    """Rows of ``Q`` against rows of ``P``; both already prepared.

    Differences are formed explicitly (no ``|a|^2 + |b|^2 - 2ab`` shortcut)
    so every entry is computed the same way regardless of block shape.
    """
    if metric is Metric.COSINE:
        out = 1.0 - np.sum(Q[:, None, :] * P[None, :, :], axis=2)
        np.maximum(out, 0.0, out=out)
        return out
    out = np.sum((Q[:, None, :] - P[None, :, :]) ** 2, axis=2)
    if metric is Metric.EUCLIDEAN:
        np.sqrt(out, out=out)
    return out


def block_rows(n: int, dim: int, budget: int = 1 << 22) -> int:
    return max(1, min(n, budget // max(1, n * dim)))


def dissimilarity_matrix(X, metric, block: int | None = None) -> np.ndarray:
    """Full N x N dissimilarity matrix with an exact zero diagonal."""
    metric = Metric.coerce(metric)
    pts = _prepare(as_dataset(X).points, metric)
    n, dim = pts.shape
    block = block or block_rows(n, dim)
    out = np.empty((n, n), dtype=np.float64)
    for start in range(0, n, block):
        stop = min(n, start + block)
        out[start:stop] = _block_dissimilarity(pts[start:stop], pts, metric)
    np.fill_diagonal(out, 0.0)
    return out


# --------------------------------------------------------------------------
# partitions


def _first_appearance_labels(assignment) -> tuple[np.ndarray, int]:
    a = np.asarray(assignment)
    if a.ndim != 1:
        raise ValueError("assignment must be 1-D")
    if a.size == 0:
        return np.zeros(0, dtype=np.int64), 0
    uniq, first, inverse = np.unique(a, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    return rank[inverse.ravel()], len(uniq)


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of points to disjoint clusters."""

    assignment: np.ndarray
    round_index: int | None = None
    threshold: float | None = None
    num_clusters: int = field(init=False)

    def __post_init__(self):
        a = np.array(self.assignment, dtype=np.int64, copy=True).ravel()
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "num_clusters", int(len(np.unique(a))))

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(np.arange(n), round_index=0)

    @classmethod
    def from_clusters(cls, clusters: Iterable[Iterable[int]], n: int | None = None) -> "Partition":
        clusters = [list(c) for c in clusters]
        n = sum(len(c) for c in clusters) if n is None else n
        a = np.full(n, -1, dtype=np.int64)
        for cid, members in enumerate(clusters):
            if not members:
                raise ValueError("clusters must be non-empty")
            if np.any(a[members] >= 0):
                raise ValueError("clusters overlap")
            a[members] = cid
        if np.any(a < 0):
            raise ValueError("clusters do not cover all points")
        return canonicalize_partition(cls(a))

    @property
    def n(self) -> int:
        return len(self.assignment)

    def clusters(self) -> list[list[int]]:
        canon = canonicalize_partition(self).assignment
        order = np.argsort(canon, kind="stable")
        bounds = np.flatnonzero(np.diff(canon[order])) + 1
        return [chunk.tolist() for chunk in np.split(order, bounds)] if self.n else []

    def cluster_sets(self) -> set[frozenset]:
        return {frozenset(c) for c in self.clusters()}

    def sizes(self) -> np.ndarray:
        return np.bincount(canonicalize_partition(self).assignment)

    def same_clustering(self, other: "Partition") -> bool:
        if self.n != other.n:
            return False
        return bool(np.array_equal(canonicalize_partition(self).assignment,
                                   canonicalize_partition(other).assignment))

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.same_clustering(other)

    __hash__ = None

    def __repr__(self):
        return f"Partition(n={self.n}, K={self.num_clusters}, round={self.round_index})"


def canonicalize_partition(p) -> Partition:
    """Relabel cluster ids to 0..K-1 in order of first appearance."""
    if not isinstance(p, Partition):
        p = Partition(p)
    labels, _ = _first_appearance_labels(p.assignment)
    if np.array_equal(labels, p.assignment):
        return p
    return Partition(labels, round_index=p.round_index, threshold=p.threshold)


# --------------------------------------------------------------------------
# threshold schedules


@dataclass(frozen=True, eq=False)
class ThresholdSchedule:
    """Strictly increasing sequence of positive dissimilarity thresholds."""

    values: np.ndarray
    kind: str = "explicit"
    tau0: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if v.size == 0:
            raise ValueError("threshold schedule is empty")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("thresholds must be finite and positive")
        if np.any(np.diff(v) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if self.kind not in ("geometric", "linear", "explicit"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.tau0 is None:
            object.__setattr__(self, "tau0", float(v[0]))

    @property
    def L(self) -> int:
        return len(self.values)

    def __len__(self):
        return self.L

    def __iter__(self):
        return iter(self.values.tolist())

    @classmethod
    def geometric(cls, tau0: float, L: int, tau_max: float | None = None) -> "ThresholdSchedule":
        """``tau0 * 2**i`` for i in 0..L-1, or a geometric ramp to ``tau_max``."""
        if L < 1:
            raise ValueError("L must be >= 1")
        if tau_max is None:
            values = [tau0 * 2.0 ** i for i in range(L)]
        else:
            values = np.geomspace(tau0, tau_max, L)
        return cls(values, kind="geometric", tau0=tau0)

    @classmethod
    def linear(cls, tau0: float, tau_max: float, L: int) -> "ThresholdSchedule":
        if L < 1:
            raise ValueError("L must be >= 1")
        return cls(np.linspace(tau0, tau_max, L), kind="linear", tau0=tau0)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "ThresholdSchedule":
        return cls(values, kind="explicit")

    @classmethod
    def from_similarities(cls, s_min: float = 0.001, s_max: float = 1.0, L: int = 200,
                          kind: str = "geometric") -> "ThresholdSchedule":
        """Similarity thresholds from ``s_max`` down to ``s_min`` as ``1 - s``.

        A similarity of exactly ``s_max = 1`` maps to dissimilarity 0, which
        is not a usable threshold and is dropped.
        """
        if kind == "geometric":
            sims = np.geomspace(s_max, s_min, L)
        elif kind == "linear":
            sims = np.linspace(s_max, s_min, L)
        else:
            raise ValueError(f"unknown schedule kind {kind!r}")
        values = 1.0 - sims
        values = values[values > 0]
        return cls(np.unique(values), kind=kind, tau0=float(values[0]))


# --------------------------------------------------------------------------
# dendrograms


class Dendrogram:
    """Laminar forest over ``n_leaves`` points.

    Node ``i < n_leaves`` is the leaf for point ``i``.  Internal nodes are
    appended in creation order, so every child id is smaller than its
    parent's id.
    """

    def __init__(self, n_leaves: int, children: Sequence[Sequence[int]] = (),
                 merge_round: Sequence[int] = (), merge_threshold: Sequence[float] = ()):
        if n_leaves < 0:
            raise ValueError("n_leaves must be >= 0")
        children = [tuple(int(c) for c in ch) for ch in children]
        if not (len(children) == len(merge_round) == len(merge_threshold)):
            raise ValueError("children, merge_round and merge_threshold differ in length")
        self.n_leaves = int(n_leaves)
        n_nodes = n_leaves + len(children)
        parent = np.full(n_nodes, -1, dtype=np.int64)
        for offset, ch in enumerate(children):
            node = n_leaves + offset
            if len(ch) < 2:
                raise ValueError(f"internal node {node} has fewer than two children")
            for c in ch:
                if not 0 <= c < node:
                    raise ValueError(f"child {c} of node {node} out of order")
                if parent[c] != -1:
                    raise ValueError(f"node {c} has two parents")
                parent[c] = node
        self.parent = parent
        self._children = children
        self.merge_round = np.concatenate(
            [np.zeros(n_leaves, dtype=np.int64), np.asarray(merge_round, dtype=np.int64)])
        self.merge_threshold = np.concatenate(
            [np.zeros(n_leaves), np.asarray(merge_threshold, dtype=np.float64)])
        self._sizes = None
        self._order = None

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    def children(self, node: int) -> tuple[int, ...]:
        return () if node < self.n_leaves else self._children[node - self.n_leaves]

    def roots(self) -> list[int]:
        return np.flatnonzero(self.parent == -1).tolist()

    def internal_nodes(self) -> range:
        return range(self.n_leaves, self.n_nodes)

    def sizes(self) -> np.ndarray:
        if self._sizes is None:
            s = np.zeros(self.n_nodes, dtype=np.int64)
            s[: self.n_leaves] = 1
            for offset, ch in enumerate(self._children):
                s[self.n_leaves + offset] = s[list(ch)].sum()
            self._sizes = s
        return self._sizes

    def leaf_ranges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """DFS layout: ``(leaf_order, lo, hi)`` with node leaves = order[lo:hi]."""
        if self._order is None:
            n = self.n_nodes
            lo = np.zeros(n, dtype=np.int64)
            hi = np.zeros(n, dtype=np.int64)
            order = np.empty(self.n_leaves, dtype=np.int64)
            pos = 0
            for root in self.roots():
                stack = [(root, False)]
                while stack:
                    node, done = stack.pop()
                    if done:
                        hi[node] = pos
                        continue
                    lo[node] = pos
                    if node < self.n_leaves:
                        order[pos] = node
                        pos += 1
                        hi[node] = pos
                        continue
                    stack.append((node, True))
                    for c in reversed(self.children(node)):
                        stack.append((c, False))
            self._order = (order, lo, hi)
        return self._order

    def members(self, node: int) -> np.ndarray:
        order, lo, hi = self.leaf_ranges()
        return np.sort(order[lo[node]:hi[node]])

    def member_sets(self, internal_only: bool = False) -> list[frozenset]:
        nodes = self.internal_nodes() if internal_only else range(self.n_nodes)
        return [frozenset(self.members(v).tolist()) for v in nodes]

    def depth(self) -> np.ndarray:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes - 1, -1, -1):
            if self.parent[node] >= 0:
                d[node] = d[self.parent[node]] + 1
        return d

    def is_binary(self) -> bool:
        return all(len(ch) == 2 for ch in self._children)

    def check(self) -> None:
        """Raise ``AssertionError`` if laminarity or round ordering fails."""
        sizes = self.sizes()
        for offset, ch in enumerate(self._children):
            node = self.n_leaves + offset
            assert sizes[node] == sizes[list(ch)].sum()
            for c in ch:
                assert self.merge_round[c] <= self.merge_round[node], (c, node)
        order, lo, hi = self.leaf_ranges()
        assert sorted(order.tolist()) == list(range(self.n_leaves))

    def __repr__(self):
        return (f"Dendrogram(n_leaves={self.n_leaves}, n_nodes={self.n_nodes}, "
                f"roots={len(self.roots())})")


def tree_consistent_check(t: Dendrogram, p) -> bool:
    """Whether every cluster of ``p`` is exactly the member set of a node."""
    p = canonicalize_partition(p)
    if p.n != t.n_leaves:
        raise ValueError(f"partition has {p.n} points but dendrogram has {t.n_leaves} leaves")
    order, lo, hi = t.leaf_ranges()
    position = np.empty(t.n_leaves, dtype=np.int64)
    position[order] = np.arange(t.n_leaves)
    sizes = t.sizes()
    for members in p.clusters():
        node = members[0]
        target = len(members)
        while sizes[node] < target and t.parent[node] >= 0:
            node = t.parent[node]
        if sizes[node] != target:
            return False
        pos = position[members]
        if pos.min() < lo[node] or pos.max() >= hi[node]:
            return False
    return True
