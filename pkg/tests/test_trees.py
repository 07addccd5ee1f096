import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaconc.core import Dataset, Rectangle
from adaconc.errors import InvalidPartition, OracleUnavailable, PartitionMismatch
from adaconc.partition import Partition, SplitNode, split
from adaconc.sims import random_partition
from adaconc.trees import (Forest, MeanOracle, OptimalTree, ValidTree, fit, optimal, predict,
                           sup_discrepancy)


def halves(alpha=0.25, k=1):
    root = SplitNode(Rectangle.unit(1))
    split(root, 0, 0.5)
    return Partition(root, alpha, k)


def test_fit_examples():
    D = Dataset([[0.1], [0.2], [0.7]], [0.2, 0.4, 0.9])
    assert fit(Partition.trivial(1, 0.25, 1), D).leaf_means[0] == pytest.approx(0.5)
    D = Dataset([[0.1], [0.2], [0.3], [0.4], [0.6], [0.7], [0.8], [0.9]],
                [1, -1, 1, -1, 0.2, 0.4, 0.9, 0.5])
    T = fit(halves(), D)
    assert T.leaf_means[0] == 0.0
    assert T.leaf_counts.tolist() == [4, 4]


def test_fit_rejects_invalid_partition():
    D = Dataset([[0.1], [0.2], [0.3]], [0, 0, 0])
    with pytest.raises(InvalidPartition):
        fit(halves(k=2), D)


def test_optimal_closed_forms():
    P = halves()
    zero = optimal(P, MeanOracle(closed_form=lambda R: 0.0))
    assert zero.leaf_oracle_means.tolist() == [0.0, 0.0]
    step = optimal(P, MeanOracle(closed_form=lambda R: float(R.lo[0] >= 0.5)))
    assert step.leaf_oracle_means.tolist() == [0.0, 1.0]


def test_optimal_monte_carlo_matches_integral():
    root = SplitNode(Rectangle.unit(2))
    split(root, 1, 0.2)
    split(root.right, 1, 0.6)
    P = Partition(root, 0.25, 1)
    oracle = MeanOracle(mean_fn=lambda X: X[:, 1], n_mc=100_000, seed=3)
    means = optimal(P, oracle).leaf_oracle_means
    assert means[1] == pytest.approx(0.4, abs=3 * 0.4 / np.sqrt(12 * 100_000) * 3)
    rej = MeanOracle(mean_fn=lambda X: X[:, 1], sampler=lambda rng, m: rng.random((m, 2)),
                     n_mc=20_000, seed=3)
    assert rej.leaf_mean(P.leaves()[1].region, 1) == pytest.approx(0.4, abs=0.005)


def test_rejection_sampler_gives_up():
    oracle = MeanOracle(mean_fn=lambda X: X[:, 0], sampler=lambda rng, m: np.full((m, 1), 0.9),
                        n_mc=10, max_draws=5000)
    with pytest.raises(OracleUnavailable):
        oracle.leaf_mean(Rectangle([0.0], [0.5]))


def test_forest_predictions():
    P = halves()
    trees = [ValidTree(P, [v, v]) for v in (0.1, 0.2, 0.6)]
    assert predict(Forest(trees), [0.3]) == pytest.approx(0.3)
    assert predict(Forest([ValidTree(P, [1, 1]), ValidTree(P, [-1, -1])]), [0.7]) == 0.0
    same = Forest([ValidTree(P, [0.3, -0.2])] * 4)
    assert predict(same, [0.9]) == pytest.approx(-0.2)


def test_sup_discrepancy_examples():
    P = halves()
    T = ValidTree(P, [0.1, 0.5])
    assert sup_discrepancy(T, OptimalTree(P, [0.1, 0.5])) == 0.0
    assert sup_discrepancy(T, OptimalTree(P, [0.0, 0.2])) == pytest.approx(0.3)
    with pytest.raises(PartitionMismatch):
        sup_discrepancy(T, OptimalTree(Partition.trivial(1, 0.25, 1), [0.0]))


def test_forest_json_round_trip_exact():
    rng = np.random.default_rng(0)
    D = Dataset(rng.random((300, 3)), rng.uniform(-1, 1, 300), 1.0)
    forest = Forest([fit(random_partition(D, 10, 0.25, rng), D) for _ in range(4)], {"M": 1.0, "seed": 5})
    text = forest.to_json()
    again = Forest.from_json(text)
    assert again.to_json() == text
    pts = rng.random((1000, 3))
    np.testing.assert_array_equal(again.predict(pts), forest.predict(pts))
    assert json.loads(text)["header"]["B"] == 4


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_forest_invariants(seed):
    rng = np.random.default_rng(seed)
    D = Dataset(rng.random((200, 2)), rng.uniform(-1, 1, 200), 1.0)
    trees = [fit(random_partition(D, 8, 0.25, rng), D) for _ in range(3)]
    pts = rng.random((100, 2))
    a = Forest(trees).predict(pts)
    b = Forest(trees[::-1]).predict(pts)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)
    # forest deviation from the zero oracle is at most the worst tree's
    worst = max(sup_discrepancy(t, OptimalTree(t.partition, np.zeros(t.partition.n_leaves))) for t in trees)
    assert np.max(np.abs(Forest(trees).predict(rng.random((500, 2))))) <= worst + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_refinement_conserves_mass(seed):
    rng = np.random.default_rng(seed)
    D = Dataset(rng.random((150, 2)), rng.uniform(-1, 1, 150), 1.0)
    P = random_partition(D, 5, 0.25, rng)
    T = fit(P, D)
    ids = P.apply(D.X)
    # every internal node: children carry the parent's total
    for _, node, _ in P.nodes():
        if node.is_leaf:
            continue
        inside = [i for i, leaf in enumerate(P.leaves())
                  if np.all(leaf.region.lo >= node.region.lo) and np.all(leaf.region.hi <= node.region.hi)]
        mask = np.isin(ids, inside)
        total = sum(T.leaf_counts[i] * T.leaf_means[i] for i in inside)
        assert total == pytest.approx(D.Y[mask].sum(), abs=1e-9)
