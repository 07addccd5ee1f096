import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaconc.core import (Dataset, MembershipRule, Rectangle, count_points, membership_mask,
                          rank_transform, rank_transform_matrix, support, volume)
from adaconc.errors import InvalidDataset, InvalidRectangle
from adaconc.partition import Partition, SplitNode, split


def test_volume_examples():
    assert volume(Rectangle.unit(3)) == 1.0
    assert volume(Rectangle([0, 0], [0.5, 0.5])) == 0.25
    assert volume(Rectangle([0.1, 0, 0.25], [0.9, 1, 0.75])) == pytest.approx(0.4)


def test_support_examples():
    assert support(Rectangle.unit(2)) == frozenset()
    assert support(Rectangle([0.2, 0], [1, 1])) == {0}
    assert support(Rectangle([0, 0.5, 0], [0.5, 1, 1])) == {0, 1}


@pytest.mark.parametrize("lo,hi", [([0.5], [0.5]), ([0.6], [0.5]), ([-0.1], [0.5]),
                                   ([0.0], [1.1]), ([np.nan], [1.0]), ([], [])])
def test_rectangle_rejects_bad_bounds(lo, hi):
    with pytest.raises(InvalidRectangle):
        Rectangle(lo, hi)


def test_rectangle_is_immutable_and_hashable():
    R = Rectangle([0.1], [0.4])
    with pytest.raises(ValueError):
        R.lo[0] = 0.2
    assert R == Rectangle([0.1], [0.4])
    assert len({R, Rectangle([0.1], [0.4])}) == 1


def test_count_points_examples():
    X = np.array([[0.1, 0.1], [0.3, 0.3], [0.6, 0.6], [0.9, 0.9]])
    D = Dataset(X, np.zeros(4))
    assert count_points(Rectangle([0, 0], [0.5, 0.5]), D) == 2
    assert count_points(Rectangle.unit(2), D) == 4
    assert count_points(Rectangle([0.4, 0.4], [0.5, 0.5]), D) == 0


def test_membership_boundaries():
    X = np.array([[0.0], [0.5], [1.0]])
    lower = Rectangle([0.0], [0.5])
    upper = Rectangle([0.5], [1.0])
    assert membership_mask(lower, X).tolist() == [True, True, False]
    assert membership_mask(upper, X).tolist() == [False, False, True]
    assert membership_mask(upper, X, MembershipRule.CLOSED).tolist() == [False, True, True]


def test_dataset_validation():
    with pytest.raises(InvalidDataset, match=r"X\[1, 0\]"):
        Dataset([[0.2], [1.2]], [0, 0])
    with pytest.raises(InvalidDataset):
        Dataset([[0.2]], [0, 1])
    with pytest.raises(InvalidDataset):
        Dataset([[0.2], [0.3]], [0.5, 2.0], M=1.0)
    assert Dataset([[0.2], [0.3]], [0.5, -2.0]).M == 2.0


def test_rank_transform_examples():
    np.testing.assert_allclose(rank_transform_matrix([[3.0], [1.0], [2.0]]).ravel(),
                               [5 / 6, 1 / 6, 0.5])
    np.testing.assert_allclose(rank_transform_matrix([[7.0], [7.0], [7.0]]).ravel(), [0.5] * 3)
    col = (np.array([2, 0, 1, 3]) + 0.5) / 4
    D = Dataset(col.reshape(-1, 1), np.zeros(4))
    np.testing.assert_array_equal(rank_transform(D).X.ravel(), col)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-10**4, 10**4), min_size=2, max_size=40))
def test_rank_transform_invariant_under_monotone_maps(values):
    x = (np.array(values, dtype=float) / 7.0).reshape(-1, 1)
    base = rank_transform_matrix(x)
    np.testing.assert_array_equal(rank_transform_matrix(x ** 3 + 2 * x), base)
    np.testing.assert_array_equal(rank_transform_matrix(np.exp(x / 1e3)), base)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 6))
def test_leaf_counts_are_exhaustive_and_disjoint(seed, d, n_splits):
    rng = np.random.default_rng(seed)
    # discrete grid so that points land on split boundaries
    X = rng.integers(0, 5, (60, d)) / 4.0
    D = Dataset(X, np.zeros(60))
    root = SplitNode(Rectangle.unit(d))
    leaves = [root]
    for _ in range(n_splits):
        node = leaves.pop(rng.integers(len(leaves)))
        j = int(rng.integers(d))
        lo, hi = node.region.lo[j], node.region.hi[j]
        split(node, j, lo + (hi - lo) * rng.uniform(0.1, 0.9))
        leaves += [node.left, node.right]
    P = Partition(root, 0.25, 1)
    assert sum(count_points(leaf.region, D) for leaf in P.leaves()) == 60
    assert sum(volume(leaf.region) for leaf in P.leaves()) == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 0.9), st.floats(0.01, 1)), min_size=1, max_size=5))
def test_volume_is_product_of_widths(axes):
    lo = [a for a, _ in axes]
    hi = [min(1.0, a + w) for a, w in axes]
    if any(h <= l for l, h in zip(lo, hi)):
        return
    R = Rectangle(lo, hi)
    assert 0 < volume(R) <= 1
    assert volume(R) == pytest.approx(np.prod(np.subtract(hi, lo)))
