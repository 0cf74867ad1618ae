"""Synthetic datasets.

``generate_separated`` builds data whose separation ratio is certified on
the realized sample, ``generate_mixture`` draws from a truncated
stick-breaking Gaussian mixture, and ``generate_model_separated`` builds a
graph-structured dissimilarity table for which single linkage prefers
merges that keep the latent graph connected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_nonnegative
from .core import (
    Dataset,
    Metric,
    Partition,
    ThresholdSchedule,
    canonicalize_partition,
    dissimilarity_matrix,
)


class InfeasibleSpec(ValueError):
    pass


@dataclass(frozen=True)
class SeparationSpec:
    k: int
    n_per_cluster: int
    dim: int
    delta: float
    seed: int = 0
    metric: Metric = Metric.SQEUCLIDEAN
    radius: float = 1.0
    max_retries: int = 20

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric.coerce(self.metric))
        check_int(self.k, "k", 1)
        check_int(self.n_per_cluster, "n_per_cluster", 1)
        check_int(self.dim, "dim", 1)
        check_nonnegative(self.delta, "delta", strict=True)
        check_nonnegative(self.radius, "radius", strict=True)
        if self.metric is Metric.COSINE:
            raise ValueError("separated data is generated for euclidean metrics only")


def _lattice(k: int, dim: int) -> np.ndarray:
    """First ``k`` points of the integer grid, unit spacing."""
    side = max(2, math.ceil(k ** (1.0 / dim) - 1e-12))
    idx = np.arange(k)
    coords = np.empty((k, dim))
    for j in range(dim):
        coords[:, j] = idx % side
        idx = idx // side
    return coords


def _ball(rng, n: int, dim: int, r: float) -> np.ndarray:
    v = rng.standard_normal((n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (r * rng.random(n) ** (1.0 / dim))[:, None]


def _in_metric(euclid, metric: Metric):
    return euclid ** 2 if metric is Metric.SQEUCLIDEAN else euclid


def separation_certificate(points, labels, centers, metric) -> tuple[float, float]:
    """``(R, min_gap)`` in ``metric`` units for the given target centers."""
    metric = Metric.coerce(metric)
    radial = np.linalg.norm(points - centers[labels], axis=1)
    R = float(_in_metric(radial.max(), metric))
    if len(centers) < 2:
        return R, math.inf
    gaps = dissimilarity_matrix(centers, metric)
    gaps[np.diag_indices_from(gaps)] = np.inf
    return R, float(gaps.min())


def generate_separated(spec: SeparationSpec) -> tuple[Dataset, float, float]:
    """Points in balls around grid centers spaced for ratio ``delta``.

    The ratio min_gap / R is re-measured on the sample with the generating
    centers, and the draw is repeated if it falls short.
    Returns ``(dataset, R, min_gap)``.
    """
    rng = np.random.default_rng(spec.seed)
    r = spec.radius
    # euclidean spacing s gives metric gap s (euclidean) or s^2 (squared)
    need = spec.delta * _in_metric(r, spec.metric)
    spacing = need if spec.metric is Metric.EUCLIDEAN else math.sqrt(need)
    spacing *= 1.0 + 1e-9
    centers = _lattice(spec.k, spec.dim) * spacing
    labels = np.repeat(np.arange(spec.k), spec.n_per_cluster)
    for _ in range(spec.max_retries):
        points = centers[labels] + _ball(rng, len(labels), spec.dim, r)
        R, gap = separation_certificate(points, labels, centers, spec.metric)
        if spec.k == 1 or gap >= spec.delta * R:
            return Dataset(points, labels), R, gap
    raise InfeasibleSpec(f"could not certify delta={spec.delta} after {spec.max_retries} draws")


def min_pairwise_dissimilarity(X, metric) -> float:
    """Smallest dissimilarity between two distinct points."""
    D = dissimilarity_matrix(X, metric)
    D[np.diag_indices_from(D)] = np.inf
    return float(D.min())


def stick_breaking(k: int, spread: float, rng) -> np.ndarray:
    """Beta(1, spread) stick-breaking weights truncated to ``k`` atoms."""
    b = rng.beta(1.0, spread, size=k)
    b[-1] = 1.0
    rest = np.concatenate([[1.0], np.cumprod(1.0 - b[:-1])])
    return b * rest


def generate_mixture(k: int, n: int, dim: int, spread: float = 5.0, seed: int = 0,
                     cluster_std: float = 1.0, center_scale: float = 5.0,
                     normalize: bool = False) -> Dataset:
    """Spherical Gaussian clusters with stick-breaking proportions.

    ``normalize`` projects points onto the unit sphere.  Labels are the
    mixture component of each point; empty components do not appear.
    """
    check_int(k, "k", 1)
    check_int(n, "n", k)
    check_int(dim, "dim", 1)
    check_nonnegative(spread, "spread", strict=True)
    rng = np.random.default_rng(seed)
    weights = stick_breaking(k, spread, rng)
    centers = rng.standard_normal((k, dim)) * center_scale
    labels = rng.choice(k, size=n, p=weights)
    points = centers[labels] + rng.standard_normal((n, dim)) * cluster_std
    if normalize:
        points /= np.linalg.norm(points, axis=1, keepdims=True)
    _, labels = np.unique(labels, return_inverse=True)
    return Dataset(points, labels)


# --------------------------------------------------------------------------
# model-based separation


@dataclass(frozen=True)
class ModelSeparationInstance:
    edges: np.ndarray
    target: Partition
    table: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.table.shape[0]


def generate_model_separated(k: int, n: int, seed: int = 0) -> ModelSeparationInstance:
    """``k`` random spanning trees over ``n`` points and a tiered table.

    Tree edges get the smallest entries, other same-tree pairs the middle
    ones and cross-tree pairs the largest; all entries are distinct.
    """
    check_int(k, "k", 1)
    check_int(n, "n", k)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    cuts = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False)) if k > 1 else []
    groups = np.split(perm, cuts)
    labels = np.empty(n, dtype=np.int64)
    edges = []
    for g, members in enumerate(groups):
        labels[members] = g
        for i in range(1, len(members)):
            edges.append((members[int(rng.integers(i))], members[i]))
    edges = np.array(sorted((min(a, b), max(a, b)) for a, b in edges), dtype=np.int64).reshape(-1, 2)
    iu, ju = np.triu_indices(n, 1)
    tree = np.zeros((n, n), dtype=bool)
    tree[edges[:, 0], edges[:, 1]] = True
    tier = np.where(tree[iu, ju], 0, np.where(labels[iu] == labels[ju], 1, 2))
    rank = np.lexsort((rng.random(len(iu)), tier))
    values = np.empty(len(iu))
    values[rank] = np.arange(1, len(iu) + 1, dtype=np.float64)
    table = np.zeros((n, n))
    table[iu, ju] = values
    table[ju, iu] = values
    return ModelSeparationInstance(edges, canonicalize_partition(labels), table)


def _connected_subsets(n: int, adj: list[int]) -> list[int]:
    seen = set()
    frontier = [1 << i for i in range(n)]
    seen.update(frontier)
    while frontier:
        nxt = []
        for s in frontier:
            nb = 0
            for i in range(n):
                if s >> i & 1:
                    nb |= adj[i]
            nb &= ~s
            while nb:
                low = nb & -nb
                t = s | low
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
                nb ^= low
        frontier = nxt
    return sorted(seen)


def check_model_separation(inst: ModelSeparationInstance, max_n: int = 14) -> bool:
    """Exhaustively check the separation implication under single linkage.

    For disjoint connected subsets C0, C1, C2 with C0+C1 connected and
    C0+C2 not, require d(C0, C1) < d(C0, C2).  Also requires all
    off-diagonal table entries to be distinct.  C1 and C2 are not required
    to be disjoint from each other, which only makes the check stricter.
    """
    n = inst.n
    if n > max_n:
        raise ValueError(f"exhaustive check is limited to n <= {max_n}")
    iu = np.triu_indices(n, 1)
    if len(np.unique(inst.table[iu])) != len(iu[0]):
        return False
    adj = [0] * n
    for a, b in inst.edges:
        adj[a] |= 1 << int(b)
        adj[b] |= 1 << int(a)
    subsets = np.array(_connected_subsets(n, adj), dtype=np.int64)
    bits = ((subsets[:, None] >> np.arange(n)) & 1).astype(bool)          # M x n
    nbr = np.array(adj, dtype=np.int64)
    touch = np.zeros(len(subsets), dtype=np.int64)
    for i in range(n):
        touch |= np.where(bits[:, i], nbr[i], 0)
    T = inst.table.copy()
    T[np.diag_indices(n)] = np.inf
    row_min = np.where(bits[None, :, :], T[:, None, :], np.inf).min(axis=2)   # n x M
    single = np.full((len(subsets), len(subsets)), np.inf)
    for i in range(n):
        single = np.where(bits[:, i:i + 1], np.minimum(single, row_min[i][None, :]), single)
    disjoint = (subsets[:, None] & subsets[None, :]) == 0
    joined = (touch[:, None] & subsets[None, :]) != 0
    near = np.where(disjoint & joined, single, -np.inf).max(axis=1)
    far = np.where(disjoint & ~joined, single, np.inf).min(axis=1)
    return bool(np.all(near < far))


def model_separated_schedule(inst: ModelSeparationInstance) -> ThresholdSchedule:
    """Thresholds that make single-linkage SCC replay single-linkage HAC on the table."""
    from .hac import hac_epsilon, hac_thresholds_for_scc, run_hac

    steps, _ = run_hac(inst.table, "single", "precomputed", algorithm="naive")
    return hac_thresholds_for_scc(steps, hac_epsilon(inst.table, "single", "precomputed"))
