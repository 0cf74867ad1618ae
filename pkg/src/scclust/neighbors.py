"""Exact k-nearest-neighbor graphs.

Brute force over fixed-size row blocks.  Block boundaries do not depend on
the worker count, so a graph built with 1 or 16 threads is bit-identical.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Metric, _block_dissimilarity, _prepare, as_dataset, block_rows


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    """Per-point neighbor lists sorted by ascending dissimilarity.

    ``indices[i, j]`` is the j-th nearest neighbor of point ``i`` and
    ``distances[i, j]`` its dissimilarity.  Ties are broken toward the lower
    point index.
    """

    indices: np.ndarray
    distances: np.ndarray
    metric: Metric

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        dist = np.asarray(self.distances, dtype=np.float64)
        if idx.shape != dist.shape or idx.ndim != 2:
            raise ValueError("indices and distances must be matching 2-D arrays")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "distances", dist)
        object.__setattr__(self, "metric", Metric.coerce(self.metric))

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    def adjacency(self) -> list[list[tuple[int, float]]]:
        return [list(zip(row_i.tolist(), row_d.tolist()))
                for row_i, row_d in zip(self.indices, self.distances)]

    def symmetric_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unique undirected edges ``(u, v, w)`` with ``u < v``.

        An edge is present if either endpoint lists the other.
        """
        n, k = self.indices.shape
        src = np.repeat(np.arange(n, dtype=np.int64), k)
        dst = self.indices.ravel()
        w = self.distances.ravel()
        u = np.minimum(src, dst)
        v = np.maximum(src, dst)
        key = u * n + v
        order = np.argsort(key, kind="stable")
        key = key[order]
        keep = np.ones(len(key), dtype=bool)
        keep[1:] = key[1:] != key[:-1]
        sel = order[keep]
        return u[sel], v[sel], w[sel]

    def prefix(self, k: int) -> "NeighborGraph":
        if not 1 <= k <= self.k:
            raise ValueError(f"k must be in [1, {self.k}]")
        return NeighborGraph(self.indices[:, :k].copy(), self.distances[:, :k].copy(), self.metric)

    def to_jsonl(self, path=None, ids=None, header: dict | None = None) -> str:
        ids = list(range(self.n)) if ids is None else list(ids)
        meta = {"metric": self.metric.value, "k": self.k, **(header or {})}
        lines = [json.dumps({"_meta": meta}, sort_keys=True)]
        for i in range(self.n):
            nbrs = [[int(j), float(d)] for j, d in zip(self.indices[i], self.distances[i])]
            lines.append(json.dumps({"id": ids[i], "neighbors": nbrs}))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_jsonl(cls, path_or_text, metric=None) -> "NeighborGraph":
        if os.path.exists(str(path_or_text)):
            with open(path_or_text) as fh:
                text = fh.read()
        else:
            text = str(path_or_text)
        rows = []
        meta = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if "_meta" in rec:
                meta.update(rec["_meta"])
                continue
            rows.append(rec["neighbors"])
        if not rows:
            raise ValueError("graph file has no records")
        k = len(rows[0])
        if any(len(r) != k for r in rows):
            raise ValueError("ragged neighbor lists")
        arr = np.array(rows, dtype=np.float64).reshape(len(rows), k, 2)
        metric = metric or meta.get("metric")
        if metric is None:
            raise ValueError("graph metric unknown; pass metric=")
        return cls(arr[:, :, 0].astype(np.int64), arr[:, :, 1], metric)


def _knn_rows(pts, start, stop, k, metric):
    d = _block_dissimilarity(pts[start:stop], pts, metric)
    rows = np.arange(start, stop)
    d[rows - start, rows] = np.inf
    kth = np.partition(d, k - 1, axis=1)[:, k - 1]
    idx = np.empty((stop - start, k), dtype=np.int64)
    for r in range(stop - start):
        cand = np.flatnonzero(d[r] <= kth[r])
        # stable sort keeps the lower index first among equal dissimilarities
        cand = cand[np.argsort(d[r, cand], kind="stable")][:k]
        idx[r] = cand
    dist = np.take_along_axis(d, idx, axis=1)
    return start, idx, dist


WORKERS_ENV = "SCCLUST_WORKERS"


def default_workers() -> int:
    """Worker count from ``$SCCLUST_WORKERS``, else 1."""
    env = os.environ.get(WORKERS_ENV, "").strip()
    if not env:
        return 1
    try:
        value = int(env)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    if value < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1, got {value}")
    return value


def build_knn_graph(d, k: int, metric=Metric.SQEUCLIDEAN, n_jobs: int | None = None,
                    block: int | None = None) -> NeighborGraph:
    """Exact k-nearest-neighbor graph, excluding self-edges."""
    data = as_dataset(d)
    metric = Metric.coerce(metric)
    n = data.n
    if n < 2:
        raise ValueError("need at least two points to build a neighbor graph")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    pts = np.ascontiguousarray(_prepare(data.points, metric))
    block = block or block_rows(n, data.dim)
    starts = list(range(0, n, block))
    n_jobs = default_workers() if n_jobs is None else max(1, int(n_jobs))
    indices = np.empty((n, k), dtype=np.int64)
    distances = np.empty((n, k), dtype=np.float64)

    def work(start):
        return _knn_rows(pts, start, min(n, start + block), k, metric)

    if n_jobs == 1:
        results = map(work, starts)
    else:
        pool = ThreadPoolExecutor(max_workers=n_jobs)
        results = pool.map(work, starts)
    for start, idx, dist in results:
        indices[start:start + len(idx)] = idx
        distances[start:start + len(idx)] = dist
    if n_jobs != 1:
        pool.shutdown()
    return NeighborGraph(indices, distances, metric)
