import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scclust.core import LinkageSpec, Partition
from scclust.hac import (
    HAC,
    cut_steps,
    hac_epsilon,
    hac_thresholds_for_scc,
    merges_to_csv,
    run_hac,
    step_partitions,
)
from scclust.linkage import linkage_value

LINE = np.array([[0.0], [1.0], [3.0]])


def test_single_linkage_example():
    steps, tree = run_hac(LINE, "single", "euclidean")
    assert [(s.left, s.right, s.height, s.new_id) for s in steps] == [(0, 1, 1.0, 3), (2, 3, 2.0, 4)]
    assert tree.is_binary() and tree.n_nodes == 5


def test_average_linkage_example():
    steps, _ = run_hac(LINE, "average", "euclidean")
    assert steps[0].height == 1.0 and steps[1].height == pytest.approx(2.5)


def test_single_point():
    steps, tree = run_hac(np.zeros((1, 2)), "average")
    assert steps == [] and tree.n_nodes == 1


def test_schedule_examples():
    from scclust.hac import MergeStep

    steps = [MergeStep(0, 1, 1.0, 3), MergeStep(2, 3, 2.0, 4)]
    assert np.allclose(hac_thresholds_for_scc(steps, 0.1).values, [1.1, 2.1])
    close = [MergeStep(0, 1, 1.0, 3), MergeStep(2, 3, 1.0 + 1e-9, 4)]
    with pytest.raises(ValueError):
        hac_thresholds_for_scc(close, 1e-8)
    with pytest.raises(ValueError):
        hac_thresholds_for_scc(steps, 0.0)


def test_ties_break_lexicographically():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    steps, _ = run_hac(X, "single", "euclidean", algorithm="naive")
    assert (steps[0].left, steps[0].right) == (0, 1)
    # (2,3) and (2,4) tie at 1.0; the smaller id pair wins
    assert (steps[1].left, steps[1].right) == (2, 3)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.sampled_from(["average", "single", "complete"]),
       st.sampled_from(["sqeuclidean", "euclidean", "cosine"]), st.integers(0, 2**31))
def test_nn_chain_matches_naive(n, kind, metric, seed):
    X = np.random.default_rng(seed).normal(size=(n, 3)) + 0.2
    a, ta = run_hac(X, kind, metric, "naive")
    b, tb = run_hac(X, kind, metric, "nn-chain")
    assert set(ta.member_sets()) == set(tb.member_sets())
    assert np.allclose(sorted(s.height for s in a), sorted(s.height for s in b), rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.sampled_from(["average", "single", "complete"]), st.integers(0, 2**31))
def test_structure_and_heights(n, kind, seed):
    X = np.random.default_rng(seed).normal(size=(n, 2))
    steps, tree = run_hac(X, kind)
    assert len(steps) == n - 1
    assert tree.n_nodes == 2 * n - 1 and tree.is_binary()
    tree.check()
    heights = [s.height for s in steps]
    assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))
    # each height is the from-scratch linkage of the two merged member sets
    for s in steps:
        ref = linkage_value(tree.members(s.left), tree.members(s.right), X, l=LinkageSpec(kind))
        assert s.height == pytest.approx(ref, rel=1e-10)


def test_epsilon_below_all_margins(rng):
    X = rng.normal(size=(12, 2))
    eps = hac_epsilon(X, "average")
    steps, _ = run_hac(X, "average")
    assert 0 < eps < np.diff([s.height for s in steps]).min()
    with pytest.raises(ValueError):
        hac_epsilon(np.array([[0.0], [1.0], [2.0]]), "single", "euclidean")


def test_cut_and_step_partitions(rng):
    X = rng.normal(size=(10, 2))
    steps, _ = run_hac(X)
    parts = step_partitions(steps, 10)
    assert [p.num_clusters for p in parts] == list(range(10, 0, -1))
    for k in (1, 3, 10):
        assert parts[10 - k].same_clustering(Partition(cut_steps(steps, 10, k)))


def test_csv_and_estimator(rng):
    X = np.vstack([rng.normal(size=(15, 2)), rng.normal(size=(15, 2)) + 30])
    est = HAC(n_clusters=2).fit(X)
    assert sorted(np.bincount(est.labels_).tolist()) == [15, 15]
    text = merges_to_csv(est.steps_)
    lines = text.splitlines()
    assert lines[0] == "left,right,height,new_id" and len(lines) == 30
