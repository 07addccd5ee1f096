"""Recursive axis-aligned partitions and {alpha, k}-validity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional

import numpy as np

from .core import Dataset, Rectangle
from .errors import AlreadySplit, InvalidParams, SplitOutsideRegion


class SplitNode:
    """A node of a recursive partition.

    A leaf has no split fields and no children. Splitting at ``tau`` along
    ``axis`` creates ``left = region ∩ {x_axis <= tau}`` and
    ``right = region ∩ {x_axis > tau}``.
    """

    __slots__ = ("region", "axis", "threshold", "left", "right")

    def __init__(self, region: Rectangle):
        self.region = region
        self.axis: Optional[int] = None
        self.threshold: Optional[float] = None
        self.left: Optional[SplitNode] = None
        self.right: Optional[SplitNode] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def children(self):
        return None if self.left is None else (self.left, self.right)

    def split(self, j: int, tau: float) -> "SplitNode":
        return split(self, j, tau)

    def __repr__(self):
        if self.is_leaf:
            return f"SplitNode(leaf, {self.region!r})"
        return f"SplitNode(axis={self.axis}, tau={self.threshold!r})"


def split(node: SplitNode, j: int, tau: float) -> SplitNode:
    """Split a leaf in place and return it."""
    if not node.is_leaf:
        raise AlreadySplit("node is already split")
    R = node.region
    if not 0 <= j < R.d:
        raise SplitOutsideRegion(f"axis {j} out of range for d={R.d}")
    tau = float(tau)
    if not (R.lo[j] < tau < R.hi[j]):
        raise SplitOutsideRegion(
            f"threshold {tau!r} not strictly inside ({R.lo[j]!r}, {R.hi[j]!r}) on axis {j}")
    node.axis = int(j)
    node.threshold = tau
    node.left = SplitNode(R.with_axis(j, R.lo[j], tau))
    node.right = SplitNode(R.with_axis(j, tau, R.hi[j]))
    return node


def min_child_count(alpha: float, m: int) -> int:
    """Smallest child size allowed under balance ``alpha`` for a parent of size ``m``.

    ``alpha == 0.5`` is the median variant, which can only guarantee
    ``floor(m / 2)`` on each side.
    """
    if alpha >= 0.5:
        return m // 2
    return math.ceil(alpha * m - 1e-9)


@dataclass(frozen=True)
class Violation:
    node: str
    rule: str
    detail: str

    def __str__(self):
        return f"{self.node}: {self.rule} ({self.detail})"


@dataclass(frozen=True)
class ValidityVerdict:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


class Partition:
    """A recursive partition of ``[0, 1]^d`` with its validity parameters."""

    def __init__(self, root: SplitNode, alpha: float, k: int):
        if not 0.0 < alpha <= 0.5:
            raise InvalidParams(f"alpha must lie in (0, 0.5], got {alpha!r}")
        if k < 1:
            raise InvalidParams(f"k must be >= 1, got {k!r}")
        self.root = root
        self.alpha = float(alpha)
        self.k = int(k)

    @classmethod
    def trivial(cls, d: int, alpha: float, k: int) -> "Partition":
        return cls(SplitNode(Rectangle.unit(d)), alpha, k)

    @property
    def d(self) -> int:
        return self.root.region.d

    def nodes(self) -> Iterator[tuple]:
        """Yield ``(path, node, depth)`` in depth-first, left-first order."""
        stack = [("", self.root, 0)]
        while stack:
            path, node, depth = stack.pop()
            yield path, node, depth
            if not node.is_leaf:
                stack.append((path + "R", node.right, depth + 1))
                stack.append((path + "L", node.left, depth + 1))

    def leaves(self) -> List[SplitNode]:
        return [node for _, node, _ in self.nodes() if node.is_leaf]

    def leaf_depths(self) -> List[int]:
        return [depth for _, node, depth in self.nodes() if node.is_leaf]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    def leaf_index(self) -> dict:
        return {id(leaf): i for i, leaf in enumerate(self.leaves())}

    def leaf_of(self, x) -> SplitNode:
        return leaf_of(self, x)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id (depth-first order) of every row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        out = np.empty(X.shape[0], dtype=np.int64)
        counter = 0
        # explicit stack so leaf ids follow the same left-first order as leaves()
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf:
                out[idx] = counter
                counter += 1
                continue
            go_left = X[idx, node.axis] <= node.threshold
            stack.append((node.right, idx[~go_left]))
            stack.append((node.left, idx[go_left]))
        return out

    def validate(self, D: Dataset) -> ValidityVerdict:
        return validate(self, D)

    def same_structure(self, other: "Partition") -> bool:
        if self is other:
            return True
        a = [(p, n.axis, n.threshold) for p, n, _ in self.nodes()]
        b = [(p, n.axis, n.threshold) for p, n, _ in other.nodes()]
        return a == b and self.d == other.d

    def to_dict(self, leaf_stats=None) -> dict:
        """JSON-ready tree; ``leaf_stats[i] = (count, mean)`` fills leaf records."""
        index = self.leaf_index()

        def encode(node):
            if node.is_leaf:
                count = mean = None
                if leaf_stats is not None:
                    count, mean = leaf_stats[index[id(node)]]
                    count = None if count is None else int(count)
                    mean = None if mean is None else float(mean)
                return {"leaf": {"lo": [float(v) for v in node.region.lo],
                                 "hi": [float(v) for v in node.region.hi],
                                 "count": count, "mean": mean}}
            return {"axis": node.axis, "tau": node.threshold,
                    "children": [encode(node.left), encode(node.right)]}

        return {"d": self.d, "alpha": self.alpha, "k": self.k, "root": encode(self.root)}

    @classmethod
    def from_dict(cls, doc: dict):
        """Inverse of :meth:`to_dict`; returns ``(partition, leaf_stats)``."""
        d = int(doc["d"])
        stats = []
        root = SplitNode(Rectangle.unit(d))
        stack = [(root, doc["root"])]
        order = []
        while stack:
            node, nd = stack.pop()
            if "leaf" in nd:
                order.append(nd["leaf"])
                continue
            split(node, int(nd["axis"]), float(nd["tau"]))
            stack.append((node.right, nd["children"][1]))
            stack.append((node.left, nd["children"][0]))
        for leaf in order:
            stats.append((leaf.get("count"), leaf.get("mean")))
        return cls(root, float(doc["alpha"]), int(doc["k"])), stats


def node_name(path: str) -> str:
    """``"LR"`` becomes ``"root/L/R"``."""
    return "/".join(["root", *path])


def validate(P: Partition, D: Dataset) -> ValidityVerdict:
    """Check that every split keeps a fraction alpha per child and every leaf has >= k points."""
    if P.d != D.d:
        raise InvalidParams(f"partition has d={P.d} but dataset has d={D.d}")
    violations = []
    stack = [("", P.root, np.arange(D.n))]
    while stack:
        path, node, idx = stack.pop()
        name = node_name(path)
        m = idx.size
        if node.is_leaf:
            if m < P.k:
                violations.append(Violation(name, "leaf size", f"{m} < k={P.k}"))
            continue
        go_left = D.X[idx, node.axis] <= node.threshold
        left, right = idx[go_left], idx[~go_left]
        need = min_child_count(P.alpha, m)
        for side, child in (("L", left), ("R", right)):
            if child.size < need:
                violations.append(Violation(
                    node_name(path + side), "child fraction",
                    f"{child.size} of {m} < ceil(alpha*m)={need}"))
        stack.append((path + "R", node.right, right))
        stack.append((path + "L", node.left, left))
    violations.sort(key=lambda v: (v.node, v.rule))
    return ValidityVerdict(violations)


def leaf_of(P: Partition, x) -> SplitNode:
    """The unique leaf containing ``x`` (``x_j <= tau`` goes left)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != P.d:
        raise InvalidParams(f"point has {x.size} coordinates, partition has d={P.d}")
    node = P.root
    while not node.is_leaf:
        node = node.left if x[node.axis] <= node.threshold else node.right
    return node


def max_support_size(n: int, k: int, alpha: float) -> int:
    """Largest number of distinct split axes a valid leaf can use, plus one.

    ``s = floor(log(n/k) / log(1/(1-alpha))) + 1``.
    """
    if not (1 <= k <= n):
        raise InvalidParams(f"need 1 <= k <= n, got k={k}, n={n}")
    if not 0.0 < alpha < 0.5:
        raise InvalidParams(f"alpha must lie in (0, 0.5), got {alpha!r}")
    return math.floor(math.log(n / k) / math.log(1.0 / (1.0 - alpha))) + 1


def depth_bound(n: int, k: int, alpha: float) -> float:
    """Maximum leaf depth of any {alpha, k}-valid partition on n points."""
    return math.log(n / k) / math.log(1.0 / (1.0 - alpha))
