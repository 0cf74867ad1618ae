import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scclust.core import LinkageSpec, ThresholdSchedule, tree_consistent_check
from scclust.evaluation import pairwise_f1
from scclust.scc import SccConfig, run_scc
from scclust.synthesis import (
    ModelSeparationInstance,
    SeparationSpec,
    _lattice,
    check_model_separation,
    generate_mixture,
    generate_model_separated,
    generate_separated,
    min_pairwise_dissimilarity,
    model_separated_schedule,
    separation_certificate,
    stick_breaking,
)


def test_single_cluster_is_trivially_certified():
    d, R, gap = generate_separated(SeparationSpec(1, 20, 3, 30.0))
    assert gap == np.inf and d.labels.tolist() == [0] * 20


def test_two_clusters_1d():
    d, R, gap = generate_separated(SeparationSpec(2, 30, 1, 6.0, metric="euclidean"))
    assert R <= 1.0 and gap >= 6.0 * R
    centers = np.array([d.points[d.labels == c].mean() for c in (0, 1)])
    assert abs(centers[1] - centers[0]) >= 5.0


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(1, 6), st.sampled_from([(30.0, "sqeuclidean"), (6.0, "euclidean")]),
       st.integers(0, 2**31))
def test_certification_is_sound(k, dim, dm, seed):
    delta, metric = dm
    d, R, gap = generate_separated(SeparationSpec(k, 15, dim, delta, seed=seed, metric=metric))
    centers = np.array([d.points[d.labels == c].mean(0) for c in range(k)])
    assert gap >= delta * R
    # re-measure against the generating grid (radius 1)
    spacing = (delta if metric == "euclidean" else math.sqrt(delta)) * (1 + 1e-9)
    R2, gap2 = separation_certificate(d.points, d.labels, _lattice(k, dim) * spacing, metric)
    assert (R2, gap2) == (R, gap)
    assert np.all(np.isfinite(centers))


def test_separated_is_deterministic_and_validates():
    a = generate_separated(SeparationSpec(4, 10, 2, 30.0, seed=5))[0]
    b = generate_separated(SeparationSpec(4, 10, 2, 30.0, seed=5))[0]
    assert np.array_equal(a.points, b.points)
    with pytest.raises(ValueError):
        SeparationSpec(3, 10, 2, 30.0, metric="cosine")
    with pytest.raises(ValueError):
        SeparationSpec(3, 10, 2, 0.0)


def test_separated_recovered_by_scc():
    d, R, gap = generate_separated(SeparationSpec(5, 20, 4, 30.0, seed=2))
    tau0 = min_pairwise_dissimilarity(d.points, "sqeuclidean")
    traces, _ = run_scc(d, SccConfig(ThresholdSchedule.geometric(tau0, 40), LinkageSpec("average")))
    assert max(pairwise_f1(t.partition, d.labels)[2] for t in traces) == 1.0


def test_mixture_determinism_and_k1():
    a = generate_mixture(5, 200, 3, seed=11)
    b = generate_mixture(5, 200, 3, seed=11)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.labels, b.labels)
    one = generate_mixture(1, 50, 2, seed=1)
    assert set(one.labels.tolist()) == {0}
    unit = generate_mixture(4, 100, 5, seed=2, normalize=True)
    assert np.allclose(np.linalg.norm(unit.points, axis=1), 1.0)
    with pytest.raises(ValueError):
        generate_mixture(5, 3, 2)


def test_stick_breaking_matches_expectation():
    k, s, trials = 8, 3.0, 4000
    rng = np.random.default_rng(0)
    W = np.array([stick_breaking(k, s, rng) for _ in range(trials)])
    assert np.allclose(W.sum(1), 1.0)
    q = s / (1 + s)
    expect = np.array([(1 - q) * q ** j for j in range(k - 1)] + [q ** (k - 1)])
    tol = 4 * W.std(0) / np.sqrt(trials)
    assert np.all(np.abs(W.mean(0) - expect) <= tol)


def test_mixture_cluster_counts_follow_weights():
    # over 100 seeds, occupied components match the count implied by the drawn weights
    k, n, s = 10, 60, 5.0
    observed, predicted = [], []
    for seed in range(100):
        d = generate_mixture(k, n, 2, spread=s, seed=seed)
        w = stick_breaking(k, s, np.random.default_rng(seed))
        observed.append(len(np.unique(d.labels)))
        predicted.append(float(np.sum(1 - (1 - w) ** n)))
    diff = np.array(observed) - np.array(predicted)
    assert abs(diff.mean()) <= 4 * diff.std() / np.sqrt(len(diff)) + 1e-9


@pytest.mark.parametrize("k, n, seed", [(2, 6, 0), (3, 9, 1), (1, 8, 2), (4, 12, 3), (6, 6, 4)])
def test_model_separated_instances(k, n, seed):
    inst = generate_model_separated(k, n, seed)
    assert inst.target.num_clusters == k
    assert len(inst.edges) == n - k
    assert check_model_separation(inst)
    traces, tree = run_scc(inst.table, SccConfig(model_separated_schedule(inst), LinkageSpec("single")),
                           metric="precomputed")
    assert tree_consistent_check(tree, inst.target)


def test_singleton_components():
    inst = generate_model_separated(5, 5, 0)
    assert inst.target.num_clusters == 5 and len(inst.edges) == 0
    assert check_model_separation(inst)


def test_violations_are_detected():
    inst = generate_model_separated(2, 6, 0)
    T = inst.table.copy()
    a, b = inst.edges[0]
    other = int(np.flatnonzero(inst.target.assignment != inst.target.assignment[a])[0])
    # make a cross-component pair the closest of all
    T[a, other] = T[other, a] = 0.5
    assert not check_model_separation(ModelSeparationInstance(inst.edges, inst.target, T))
    T2 = inst.table.copy()
    T2[0, 1] = T2[1, 0] = T2[0, 2]
    assert not check_model_separation(ModelSeparationInstance(inst.edges, inst.target, T2))
    with pytest.raises(ValueError):
        check_model_separation(generate_model_separated(2, 16, 0))
