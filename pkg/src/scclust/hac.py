"""Best-first hierarchical agglomerative clustering (HAC).

Two implementations of the same merge rule share the Lance-Williams
updates below.  ``"naive"`` scans the whole active matrix every merge and
breaks ties toward the lexicographically smallest ``(left, right)`` node id
pair; it is the correctness reference.  ``"nn-chain"`` follows reciprocal
nearest-neighbor chains in O(N^2) time and gives the same tree for
reducible linkages without ties.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from ._validation import check_metric, check_points
from .core import (
    Dendrogram,
    Linkage,
    LinkageSpec,
    ThresholdSchedule,
    as_dataset,
    canonicalize_partition,
    dissimilarity_matrix,
)


@dataclass(frozen=True)
class MergeStep:
    left: int
    right: int
    height: float
    new_id: int


def _lance_williams(kind: Linkage, di, dj, si, sj):
    if kind is Linkage.SINGLE:
        return np.minimum(di, dj)
    if kind is Linkage.COMPLETE:
        return np.maximum(di, dj)
    return (si * di + sj * dj) / (si + sj)


def _matrix(d, metric) -> np.ndarray:
    if metric == "precomputed":
        D = np.array(d, dtype=np.float64, copy=True)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("precomputed dissimilarities must be square")
        return D
    return dissimilarity_matrix(as_dataset(d), metric)


def _naive(D: np.ndarray, kind: Linkage, margins: list | None = None) -> list[MergeStep]:
    n = D.shape[0]
    ids = list(range(n))
    sizes = np.ones(n)
    D = D.copy()
    steps = []
    next_id = n
    while len(ids) > 1:
        K = len(ids)
        masked = np.where(np.triu(np.ones((K, K), dtype=bool), 1), D, np.inf)
        flat = int(np.argmin(masked))
        p, q = divmod(flat, K)
        height = float(D[p, q])
        if margins is not None and K > 2:
            margins.append(float(np.partition(masked[masked < np.inf], 1)[1]) - height)
        row = _lance_williams(kind, D[p], D[q], sizes[p], sizes[q])
        steps.append(MergeStep(ids[p], ids[q], height, next_id))
        keep = [i for i in range(K) if i not in (p, q)]
        new_row = row[keep]
        D = np.block([[D[np.ix_(keep, keep)], new_row[:, None]],
                      [new_row[None, :], np.zeros((1, 1))]])
        sizes = np.append(sizes[keep], sizes[p] + sizes[q])
        ids = [ids[i] for i in keep] + [next_id]
        next_id += 1
    return steps


def _nn_chain(D: np.ndarray, kind: Linkage) -> list[MergeStep]:
    """Reciprocal nearest-neighbor chain; ``D`` is overwritten."""
    n = D.shape[0]
    np.fill_diagonal(D, np.inf)
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    raw = []
    chain: list[int] = []
    remaining = n
    while remaining > 1:
        if not chain:
            chain.append(int(np.flatnonzero(active)[0]))
        a = chain[-1]
        b = int(np.argmin(D[a]))
        if len(chain) > 1:
            prev = chain[-2]
            if D[a, prev] <= D[a, b]:
                b = prev
        if len(chain) > 1 and b == chain[-2]:
            chain.pop()
            chain.pop()
            i, j = min(a, b), max(a, b)
            raw.append((i, j, float(D[i, j])))
            row = _lance_williams(kind, D[i], D[j], sizes[i], sizes[j])
            row[i] = row[j] = np.inf
            D[i, :] = row
            D[:, i] = row
            D[j, :] = np.inf
            D[:, j] = np.inf
            sizes[i] += sizes[j]
            active[j] = False
            remaining -= 1
        else:
            chain.append(b)
    order = sorted(range(len(raw)), key=lambda t: raw[t][2])
    parent = list(range(n))
    node_of_root = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    steps = []
    for step, t in enumerate(order):
        i, j, h = raw[t]
        ri, rj = find(i), find(j)
        left, right = sorted((node_of_root[ri], node_of_root[rj]))
        parent[rj] = ri
        node_of_root[ri] = n + step
        steps.append(MergeStep(left, right, h, n + step))
    return steps


def run_hac(d, l: LinkageSpec | str = "average", m="sqeuclidean", algorithm: str = "naive"):
    """Agglomerate ``d`` one pair at a time.  Returns ``(steps, dendrogram)``."""
    kind = Linkage(l.kind if isinstance(l, LinkageSpec) else l)
    m = check_metric(m)
    D = _matrix(d, m)
    n = D.shape[0]
    if n < 1:
        raise ValueError("empty dataset")
    if algorithm == "naive":
        steps = _naive(D, kind)
    elif algorithm == "nn-chain":
        steps = _nn_chain(D, kind)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return steps, steps_to_dendrogram(steps, n)


def steps_to_dendrogram(steps, n: int) -> Dendrogram:
    return Dendrogram(n, [(s.left, s.right) for s in steps],
                      list(range(1, len(steps) + 1)), [s.height for s in steps])


def hac_thresholds_for_scc(steps, epsilon: float) -> ThresholdSchedule:
    """Schedule ``{height + epsilon}`` that makes SCC replay ``steps``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    heights = np.unique([s.height for s in steps])
    if len(heights) == 0:
        raise ValueError("no merges to build a schedule from")
    if len(heights) > 1:
        gap = float(np.diff(heights).min())
        if epsilon >= gap:
            raise ValueError(f"epsilon={epsilon} is not below the smallest height gap {gap}")
    return ThresholdSchedule.explicit(heights + epsilon)


def hac_epsilon(d, l: LinkageSpec | str = "average", m="sqeuclidean") -> float:
    """Largest safe offset for :func:`hac_thresholds_for_scc`, halved.

    Keeping the offset below the height gaps is not enough for SCC to replay
    HAC: at ``height + epsilon`` no other current cluster pair may be within
    the threshold either.  This returns half the smallest margin between a
    merge height and the next-smallest linkage at that step.
    """
    kind = Linkage(l.kind if isinstance(l, LinkageSpec) else l)
    D = _matrix(d, check_metric(m))
    margins: list[float] = []
    steps = _naive(D, kind, margins)
    heights = [s.height for s in steps]
    margins.extend(np.diff(heights).tolist())
    margin = min(margins) if margins else 1.0
    if not margin > 0:
        raise ValueError("linkage values are not distinct; no safe epsilon exists")
    return margin / 2


def merges_to_csv(steps, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["left", "right", "height", "new_id"])
    for s in steps:
        w.writerow([s.left, s.right, repr(float(s.height)), s.new_id])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


class HAC(ClusterMixin, BaseEstimator):
    """Exact HAC baseline.

    ``n_clusters`` only controls ``labels_``; the full tree is always built.
    """

    def __init__(self, metric="sqeuclidean", linkage="average", algorithm="nn-chain", n_clusters=1):
        self.metric = metric
        self.linkage = linkage
        self.algorithm = algorithm
        self.n_clusters = n_clusters

    def fit(self, X, y=None):
        metric = check_metric(self.metric)
        X = check_points(X, metric)
        self.steps_, self.dendrogram_ = run_hac(X, self.linkage, metric, self.algorithm)
        self.labels_ = cut_steps(self.steps_, X.shape[0], self.n_clusters)
        self.n_features_in_ = X.shape[1]
        return self


def cut_steps(steps, n: int, n_clusters: int) -> np.ndarray:
    """Flat labels after applying the first ``n - n_clusters`` merges."""
    parent = list(range(2 * n))
    for s in steps[: max(0, n - n_clusters)]:
        parent[s.left] = s.new_id
        parent[s.right] = s.new_id

    def root(x):
        while parent[x] != x:
            x = parent[x]
        return x

    return canonicalize_partition([root(i) for i in range(n)]).assignment.copy()


def step_partitions(steps, n: int) -> list:
    """Flat partition after each merge, starting from singletons."""
    from .core import Partition

    members = {i: [i] for i in range(n)}
    label = np.arange(n, dtype=np.int64)
    out = [Partition(label.copy(), round_index=0, threshold=0.0)]
    for t, s in enumerate(steps, start=1):
        a, b = members.pop(s.left), members.pop(s.right)
        if len(a) < len(b):
            a, b = b, a
        label[b] = label[a[0]]
        a.extend(b)
        members[s.new_id] = a
        out.append(canonical_with(label, t, s.height))
    return out


def canonical_with(label, round_index, threshold):
    from .core import Partition

    p = canonicalize_partition(label)
    return Partition(p.assignment, round_index=round_index, threshold=threshold)
