import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaconc.core import Dataset, Rectangle
from adaconc.errors import AlreadySplit, InvalidParams, SplitOutsideRegion
from adaconc.partition import (Partition, SplitNode, depth_bound, leaf_of, max_support_size,
                               min_child_count, split, validate)




def test_split_creates_two_children():
    root = SplitNode(Rectangle.unit(1))
    split(root, 0, 0.5)
    assert (root.left.region.lo[0], root.left.region.hi[0]) == (0.0, 0.5)
    assert (root.right.region.lo[0], root.right.region.hi[0]) == (0.5, 1.0)
    with pytest.raises(AlreadySplit):
        split(root, 0, 0.25)
    with pytest.raises(SplitOutsideRegion):
        split(root.left, 0, 0.5)
    with pytest.raises(SplitOutsideRegion):
        split(root.left, 0, 0.0)


def test_nested_splits_widths():
    root = SplitNode(Rectangle.unit(1))
    split(root, 0, 0.5)
    split(root.left, 0, 0.25)
    P = Partition(root, 0.25, 1)
    widths = [leaf.region.hi[0] - leaf.region.lo[0] for leaf in P.leaves()]
    assert widths == [0.25, 0.25, 0.5]


def test_leaf_of_boundaries():
    root = SplitNode(Rectangle.unit(1))
    P = Partition(root, 0.25, 1)
    assert leaf_of(P, [0.7]) is root
    split(root, 0, 0.5)
    assert leaf_of(P, [0.5]) is root.left
    split(root.left, 0, 0.25)
    middle = root.left.right
    assert leaf_of(P, [0.3]) is middle


def _line(n):
    return Dataset(((np.arange(n) + 0.5) / n).reshape(-1, 1), np.zeros(n))


def test_validate_examples():
    D = _line(100)
    assert validate(Partition.trivial(1, 0.25, 10), D).ok

    root = SplitNode(Rectangle.unit(1))
    split(root, 0, 0.999)
    v = validate(Partition(root, 0.25, 1), D)
    assert not v.ok
    assert ("root/R", "child fraction") in [(x.node, x.rule) for x in v.violations]

    root = SplitNode(Rectangle.unit(1))
    split(root, 0, 0.5)
    v = validate(Partition(root, 0.25, 60), D)
    assert [(x.node, x.rule) for x in v.violations] == [("root/L", "leaf size"), ("root/R", "leaf size")]


def test_child_fraction_uses_ceiling():
    # alpha m = 3.2 needs 4 points, so 3 must fail
    assert min_child_count(0.2, 16) == 4
    assert min_child_count(0.25, 100) == 25
    assert min_child_count(0.5, 7) == 3


def test_max_support_size_examples():
    assert max_support_size(64, 64, 0.3) == 1
    assert max_support_size(1024, 64, 0.3) == 8
    with pytest.raises(InvalidParams):
        max_support_size(1024, 64, 0.5)


def test_json_round_trip():
    root = SplitNode(Rectangle.unit(2))
    split(root, 1, 0.3)
    split(root.right, 0, 0.6)
    P = Partition(root, 0.2, 3)
    doc = P.to_dict([(1, 0.5), (2, -0.1), (3, 0.25)])
    Q, stats = Partition.from_dict(doc)
    assert Q.same_structure(P)
    assert stats == [(1, 0.5), (2, -0.1), (3, 0.25)]


def random_valid_partition(rng, D, alpha, k):
    from adaconc.sims import random_partition
    return random_partition(D, k, alpha, rng)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 0.2, 0.25, 0.4]), st.integers(1, 20))
def test_valid_partitions_respect_depth_bound(seed, alpha, k):
    rng = np.random.default_rng(seed)
    D = Dataset(rng.random((200, 3)), np.zeros(200))
    P = random_valid_partition(rng, D, alpha, k)
    assert validate(P, D).ok
    assert max(P.leaf_depths()) <= depth_bound(D.n, k, alpha) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_leaf_of_is_a_function(seed):
    rng = np.random.default_rng(seed)
    D = Dataset(rng.random((100, 2)), np.zeros(100))
    P = random_valid_partition(rng, D, 0.25, 5)
    pts = np.vstack([rng.random((50, 2)), rng.integers(0, 3, (20, 2)) / 2.0])
    ids = P.apply(pts)
    leaves = P.leaves()
    for x, i in zip(pts, ids):
        hits = [j for j, leaf in enumerate(leaves)
                if np.all(((x > leaf.region.lo) | ((leaf.region.lo == 0) & (x >= 0))) & (x <= leaf.region.hi))]
        assert hits == [i]
        assert leaf_of(P, x) is leaves[i]
