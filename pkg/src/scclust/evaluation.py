"""Clustering quality metrics and round selection.

Dendrogram purity is computed exactly in one bottom-up pass over the tree,
or estimated from seeded same-class pair samples.  Pairwise precision,
recall and F1 use contingency-table pair counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dendrogram, Partition, as_dataset, canonicalize_partition

DEFAULT_SAMPLE_SIZE = 4_000_000


@dataclass(frozen=True)
class PairCounts:
    true_pairs: int
    pred_pairs: int
    both: int

    def __post_init__(self):
        if min(self.true_pairs, self.pred_pairs, self.both) < 0:
            raise ValueError("pair counts must be non-negative")
        if self.both > min(self.true_pairs, self.pred_pairs):
            raise ValueError("both cannot exceed either pair count")


@dataclass(frozen=True)
class PurityEstimate:
    value: float
    mode: str
    num_pairs_evaluated: int
    seed: int | None = None

    def __float__(self):
        return float(self.value)


def _labels_of(labels, n: int | None = None) -> np.ndarray:
    if isinstance(labels, Partition):
        labels = labels.assignment
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if n is not None and len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} points")
    _, inv = np.unique(labels, return_inverse=True)
    return inv.astype(np.int64)


def _pairs(counts: np.ndarray):
    counts = np.asarray(counts, dtype=np.int64)
    return counts * (counts - 1) // 2


# --------------------------------------------------------------------------
# pair counting


def pair_counts(pred, labels) -> PairCounts:
    pred = _labels_of(pred)
    truth = _labels_of(labels, len(pred))
    _, cell = np.unique(np.stack([pred, truth]), axis=1, return_counts=True)
    return PairCounts(int(_pairs(np.bincount(truth)).sum()),
                      int(_pairs(np.bincount(pred)).sum()),
                      int(_pairs(cell).sum()))


def pairwise_f1(pred, labels) -> tuple[float, float, float]:
    """Pairwise ``(precision, recall, f1)`` of ``pred`` against ``labels``.

    An empty predicted pair set has precision 1 and an empty true pair set
    has recall 1.
    """
    c = pair_counts(pred, labels)
    precision = 1.0 if c.pred_pairs == 0 else c.both / c.pred_pairs
    recall = 1.0 if c.true_pairs == 0 else c.both / c.true_pairs
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


# --------------------------------------------------------------------------
# dendrogram purity


def _check_tree_labels(t: Dendrogram, labels):
    y = _labels_of(labels)
    if len(y) != t.n_leaves:
        raise ValueError(f"{len(y)} labels for {t.n_leaves} leaves")
    class_sizes = np.bincount(y)
    total = int(_pairs(class_sizes).sum())
    if total == 0:
        raise ValueError("dendrogram purity needs a class with at least two points")
    return y, class_sizes, total


def _exact_purity(t: Dendrogram, y: np.ndarray, total: int) -> float:
    # Pairs of class c whose LCA is node v number (n_c(v)^2 - sum_child n_c(ch)^2) / 2,
    # nonzero only for classes present in two or more children.  Children are
    # merged small-to-large, so each class entry moves O(log N) times.
    n = t.n_leaves
    hist: list[dict | None] = [{int(c): 1} for c in y]
    hist.extend([None] * (t.n_nodes - n))
    sizes = t.sizes()
    acc = 0.0

    def combine(parts, size):
        nonlocal acc
        parts = sorted(parts, key=len, reverse=True)
        big = parts[0]
        sq = {}
        for small in parts[1:]:
            for c, cnt in small.items():
                if c not in sq:
                    prev = big.get(c, 0)
                    sq[c] = prev * prev
                sq[c] += cnt * cnt
                big[c] = big.get(c, 0) + cnt
        for c, s in sq.items():
            m = big[c]
            acc += (m * m - s) / 2 * (m / size)
        return big

    for node in t.internal_nodes():
        ch = t.children(node)
        hist[node] = combine([hist[c] for c in ch], int(sizes[node]))
        for c in ch:
            hist[c] = None
    roots = t.roots()
    if len(roots) > 1:
        combine([hist[r] for r in roots], n)
    return acc / total


class _LcaIndex:
    """Binary-lifting LCA over the forest plus a virtual root."""

    def __init__(self, t: Dendrogram, y: np.ndarray):
        n_nodes = t.n_nodes
        root = n_nodes
        parent = np.append(t.parent, root)
        parent[parent == -1] = root
        parent[root] = root
        depth = np.zeros(n_nodes + 1, dtype=np.int64)
        for node in range(n_nodes - 1, -1, -1):
            depth[node] = depth[parent[node]] + 1
        levels = max(1, int(depth.max()).bit_length())
        up = np.empty((levels, n_nodes + 1), dtype=np.int64)
        up[0] = parent
        for j in range(1, levels):
            up[j] = up[j - 1][up[j - 1]]
        self.up, self.depth, self.levels = up, depth, levels
        order, lo, hi = t.leaf_ranges()
        self.lo = np.append(lo, 0)
        self.hi = np.append(hi, t.n_leaves)
        self.pos = np.empty(t.n_leaves, dtype=np.int64)
        self.pos[order] = np.arange(t.n_leaves)
        # class-major DFS positions: class c leaves under a node form one key range
        self.stride = t.n_leaves + 1
        self.keys = np.sort(y * self.stride + self.pos)

    def query(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        up, depth = self.up, self.depth
        swap = depth[a] < depth[b]
        a, b = np.where(swap, b, a), np.where(swap, a, b)
        diff = depth[a] - depth[b]
        for j in range(self.levels):
            sel = ((diff >> j) & 1).astype(bool)
            a = np.where(sel, up[j][a], a)
        for j in range(self.levels - 1, -1, -1):
            ua, ub = up[j][a], up[j][b]
            move = ua != ub
            a = np.where(move, ua, a)
            b = np.where(move, ub, b)
        return np.where(a == b, a, up[0][a])


def _pair_purities(y: np.ndarray, idx: _LcaIndex, a, b) -> np.ndarray:
    lca = idx.query(a, b)
    base = y[a] * idx.stride
    lo = np.searchsorted(idx.keys, base + idx.lo[lca])
    hi = np.searchsorted(idx.keys, base + idx.hi[lca])
    size = idx.hi[lca] - idx.lo[lca]
    return (hi - lo) / size


def _all_pairs(y: np.ndarray):
    order = np.argsort(y, kind="stable")
    starts = np.searchsorted(y[order], np.arange(y.max() + 1))
    ends = np.append(starts[1:], len(y))
    for s, e in zip(starts, ends):
        members = order[s:e]
        if len(members) < 2:
            continue
        i, j = np.triu_indices(len(members), 1)
        yield members[i], members[j]


def dendrogram_purity(t: Dendrogram, labels, mode: str = "exact", seed: int = 0,
                      sample_size: int = DEFAULT_SAMPLE_SIZE) -> PurityEstimate:
    """Mean class purity of the least common ancestor over same-class pairs.

    ``mode="exact"`` visits every same-class pair once through per-node
    class histograms.  ``mode="sampled"`` draws ``sample_size`` same-class
    pairs uniformly with replacement; if that is at least the number of
    such pairs, every pair is evaluated once instead.  Leaves in different
    trees of a forest have a virtual root over all points as their LCA.
    """
    y, class_sizes, total = _check_tree_labels(t, labels)
    if mode == "exact":
        return PurityEstimate(_exact_purity(t, y, total), "exact", total)
    if mode != "sampled":
        raise ValueError(f"unknown purity mode {mode!r}")
    sample_size = int(sample_size)
    if sample_size < 1:
        raise ValueError("sample_size must be positive")
    idx = _LcaIndex(t, y)
    if sample_size >= total:
        acc = sum(_pair_purities(y, idx, a, b).sum() for a, b in _all_pairs(y))
        return PurityEstimate(float(acc / total), "sampled", total, seed)
    rng = np.random.default_rng(seed)
    weights = _pairs(class_sizes).astype(np.float64)
    order = np.argsort(y, kind="stable")
    starts = np.concatenate([[0], np.cumsum(class_sizes)[:-1]])
    acc = 0.0
    done = 0
    chunk = 1 << 18
    while done < sample_size:
        m = min(chunk, sample_size - done)
        cls = rng.choice(len(weights), size=m, p=weights / weights.sum())
        nc = class_sizes[cls]
        i = rng.integers(0, nc)
        j = rng.integers(0, nc - 1)
        j = j + (j >= i)
        a = order[starts[cls] + i]
        b = order[starts[cls] + j]
        acc += _pair_purities(y, idx, a, b).sum()
        done += m
    return PurityEstimate(float(acc / sample_size), "sampled", sample_size, seed)


# --------------------------------------------------------------------------
# round selection


def _partitions(traces) -> list[Partition]:
    parts = [getattr(r, "partition", r) for r in traces]
    if not parts:
        raise ValueError("no rounds to select from")
    return [p if isinstance(p, Partition) else canonicalize_partition(p) for p in parts]


def select_round_by_k(traces, k_target: int) -> Partition:
    """Round whose cluster count is closest to ``k_target``; ties pick the larger K."""
    parts = _partitions(traces)
    best = min(range(len(parts)),
               key=lambda i: (abs(parts[i].num_clusters - k_target), -parts[i].num_clusters, i))
    return parts[best]


def round_sse(traces, d) -> np.ndarray:
    """Within-cluster sum of squares to cluster means for every round.

    Residuals are summed directly (not as total minus between-cluster
    energy) so a round scores exactly like :func:`dp_means_cost`.
    """
    X = as_dataset(d).points
    out = []
    for p in _partitions(traces):
        if p.n != X.shape[0]:
            raise ValueError("partition and dataset sizes differ")
        lab = np.unique(p.assignment, return_inverse=True)[1]
        sums = np.zeros((p.num_clusters, X.shape[1]))
        np.add.at(sums, lab, X)
        means = sums / np.bincount(lab, minlength=p.num_clusters)[:, None]
        out.append(float(np.sum((X - means[lab]) ** 2)))
    return np.asarray(out)


def select_round_by_dp_cost(traces, d, lam: float, sse=None) -> tuple[Partition, float]:
    """Round with the lowest DP-Means cost; ties pick the earliest round.

    ``sse`` may hold precomputed :func:`round_sse` values to reuse across
    several ``lam``.
    """
    parts = _partitions(traces)
    sse = round_sse(parts, d) if sse is None else np.asarray(sse, dtype=np.float64)
    costs = sse + lam * np.array([p.num_clusters for p in parts], dtype=np.float64)
    best = int(np.argmin(costs))
    return parts[best], float(costs[best])


# --------------------------------------------------------------------------
# reports


def metrics_report(dataset: str, algorithm: str, config_digest: str, partitions, d=None,
                   labels=None, lam: float | None = None, dendrogram: Dendrogram | None = None,
                   wall_ms: float | None = None, purity_mode: str = "exact", seed: int = 0) -> dict:
    """JSON-ready summary of a run: per-round K, F1 and DP-Means cost plus purity."""
    parts = _partitions(partitions)
    sse = round_sse(parts, d) if d is not None and lam is not None else None
    rounds = []
    for i, p in enumerate(parts):
        entry = {"K": p.num_clusters,
                 "f1": None if labels is None else pairwise_f1(p, labels)[2],
                 "dp_cost": None if sse is None else float(sse[i] + lam * p.num_clusters)}
        rounds.append(entry)
    purity = None
    if dendrogram is not None and labels is not None:
        try:
            purity = dendrogram_purity(dendrogram, labels, purity_mode, seed).value
        except ValueError:
            purity = None
    return {"dataset": dataset, "algorithm": algorithm, "config_digest": config_digest,
            "per_round": rounds, "dendrogram_purity": purity, "wall_ms": wall_ms}
