import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_pair_counts, brute_purity, random_tree
from scclust.baselines import dp_means_cost
from scclust.core import Dendrogram, Partition
from scclust.evaluation import (
    PairCounts,
    dendrogram_purity,
    metrics_report,
    pair_counts,
    pairwise_f1,
    round_sse,
    select_round_by_dp_cost,
    select_round_by_k,
)


def _tree_ac_b():
    # leaves a=0, b=1, c=2; node 3 = {a, c}; root 4 = {b, 3}
    return Dendrogram(3, [(0, 2), (1, 3)], [1, 2], [1.0, 2.0])


def test_purity_examples():
    t = _tree_ac_b()
    for mode in ("exact", "sampled"):
        assert dendrogram_purity(t, [0, 0, 1], mode).value == pytest.approx(2 / 3)
    pure = Dendrogram(3, [(0, 1), (2, 3)], [1, 2], [1.0, 2.0])
    assert dendrogram_purity(pure, [0, 0, 1]).value == 1.0
    with pytest.raises(ValueError):
        dendrogram_purity(t, [0, 1])
    with pytest.raises(ValueError):
        dendrogram_purity(t, [0, 1, 2])  # no same-class pairs
    with pytest.raises(ValueError):
        dendrogram_purity(t, [0, 0, 1], mode="guess")


def test_forest_uses_whole_set_for_cross_tree_pairs():
    t = Dendrogram(4, [(0, 1)], [1], [1.0])  # {0,1} plus isolated 2 and 3
    y = [0, 0, 0, 1]
    ref = brute_purity(t, y)
    assert dendrogram_purity(t, y).value == pytest.approx(ref, abs=1e-12)
    assert dendrogram_purity(t, y, "sampled").value == pytest.approx(ref, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(1, 5), st.integers(0, 2**31))
def test_exact_purity_matches_pair_enumeration(n, n_classes, seed):
    rng = np.random.default_rng(seed)
    t = random_tree(rng, n)
    y = rng.integers(0, n_classes, size=n)
    y[:2] = y[0]  # guarantee at least one same-class pair
    val = dendrogram_purity(t, y).value
    assert 0 <= val <= 1
    assert val == pytest.approx(brute_purity(t, y), abs=1e-12)
    assert dendrogram_purity(t, y, "sampled", sample_size=10**9).value == pytest.approx(val, abs=1e-12)


def test_sampled_close_to_exact(rng):
    t = random_tree(rng, 1000)
    y = rng.integers(0, 4, size=1000)
    exact = dendrogram_purity(t, y).value
    a = dendrogram_purity(t, y, "sampled", seed=3, sample_size=100_000)
    b = dendrogram_purity(t, y, "sampled", seed=3, sample_size=100_000)
    assert a.value == b.value and a.num_pairs_evaluated == 100_000
    assert abs(a.value - exact) <= 0.02


def test_f1_examples():
    assert pairwise_f1([0, 0, 1], [0, 0, 1]) == (1.0, 1.0, 1.0)
    p, r, f = pairwise_f1([0, 0, 1], [0, 0, 0])
    assert p == 1.0 and r == pytest.approx(1 / 3) and f == pytest.approx(0.5)
    assert pairwise_f1([0, 1, 2], [0, 0, 1]) == (1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        pairwise_f1([0, 1], [0, 0, 0])
    with pytest.raises(ValueError):
        PairCounts(1, 1, 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=2, max_size=300))
def test_pair_counts_match_enumeration_and_symmetry(rows):
    pred = [a for a, _ in rows]
    truth = [b for _, b in rows]
    c = pair_counts(pred, truth)
    assert (c.true_pairs, c.pred_pairs, c.both) == brute_pair_counts(pred, truth)
    p, r, f = pairwise_f1(pred, truth)
    p2, r2, f2 = pairwise_f1(truth, pred)
    assert (p, r) == (r2, p2) and f == pytest.approx(f2)


def test_select_by_k_examples():
    parts = [Partition(np.arange(8) % k) for k in (8, 5, 3, 1)]
    assert select_round_by_k(parts, 5).num_clusters == 5
    assert select_round_by_k(parts, 4).num_clusters == 5
    assert select_round_by_k(parts[:1], 2).num_clusters == 8
    with pytest.raises(ValueError):
        select_round_by_k([], 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.floats(0.0, 50.0), st.integers(0, 2**31))
def test_select_by_cost_matches_recomputation(n, lam, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    parts = [Partition.singletons(n)] + [Partition(rng.integers(0, kk, size=n))
                                          for kk in (n // 2 + 1, 3, 1)]
    costs = [dp_means_cost(X, p, lam) for p in parts]
    assert np.allclose(round_sse(parts, X) + lam * np.array([p.num_clusters for p in parts]),
                       costs, atol=1e-9)
    best, cost = select_round_by_dp_cost(parts, X, lam)
    assert cost == pytest.approx(min(costs), abs=1e-9)
    assert costs[parts.index(best)] == pytest.approx(min(costs), abs=1e-9)


def test_select_by_cost_extremes(rng):
    X = rng.normal(size=(10, 2))
    parts = [Partition.singletons(10), Partition(np.arange(10) % 3), Partition(np.zeros(10, int))]
    assert select_round_by_dp_cost(parts, X, 0.0)[0].num_clusters == 10
    assert select_round_by_dp_cost(parts, X, 1e6)[0].num_clusters == 1


def test_metrics_report(rng):
    X = rng.normal(size=(6, 2))
    parts = [Partition.singletons(6), Partition([0, 0, 1, 1, 2, 2])]
    t = Dendrogram(6, [(0, 1), (2, 3), (4, 5)], [1, 1, 1], [1.0, 1.0, 1.0])
    rep = metrics_report("toy", "scc", "abc", parts, X, [0, 0, 1, 1, 2, 2], 1.0, t)
    assert rep["per_round"][1]["f1"] == 1.0 and rep["dendrogram_purity"] == 1.0
    assert rep["per_round"][0]["dp_cost"] == pytest.approx(6.0)
    assert set(rep) == {"dataset", "algorithm", "config_digest", "per_round", "dendrogram_purity",
                        "wall_ms"}
