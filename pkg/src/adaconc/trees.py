"""Fitted trees, partition-optimal trees and forests built on a partition."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .core import Dataset, Rectangle, membership_mask
from .errors import InvalidParams, InvalidPartition, OracleUnavailable, PartitionMismatch
from .partition import Partition, validate

DEFAULT_N_MC = 100_000


class ValidTree:
    """Piecewise-constant predictor: the sample mean of ``Y`` over the leaf of ``x``."""

    def __init__(self, partition: Partition, leaf_means, leaf_counts=None, M=None):
        self.partition = partition
        self.leaf_means = np.array(leaf_means, dtype=np.float64)
        if self.leaf_means.size != partition.n_leaves:
            raise InvalidParams("one mean per leaf is required")
        self.leaf_counts = (None if leaf_counts is None
                            else np.array(leaf_counts, dtype=np.int64))
        self.M = M
        if M is not None and np.any(np.abs(self.leaf_means) > M * (1 + 1e-12)):
            raise InvalidParams("leaf mean exceeds the response bound M")

    @property
    def d(self) -> int:
        return self.partition.d

    def predict(self, X) -> np.ndarray:
        return self.leaf_means[self.partition.apply(X)]

    def to_dict(self) -> dict:
        counts = self.leaf_counts if self.leaf_counts is not None else [None] * self.leaf_means.size
        stats = list(zip(counts, self.leaf_means))
        return self.partition.to_dict(stats)

    @classmethod
    def from_dict(cls, doc: dict, M=None) -> "ValidTree":
        partition, stats = Partition.from_dict(doc)
        counts = [c for c, _ in stats]
        means = [m for _, m in stats]
        if any(m is None for m in means):
            raise InvalidParams("tree document lacks leaf means")
        if any(c is None for c in counts):
            counts = None
        return cls(partition, means, counts, M)


class OptimalTree:
    """Same partition, leaf values set to the population means ``E[Y | X in L]``."""

    def __init__(self, partition: Partition, leaf_oracle_means, n_mc=None, seed=None):
        self.partition = partition
        self.leaf_oracle_means = np.array(leaf_oracle_means, dtype=np.float64)
        self.n_mc = n_mc
        self.seed = seed

    @property
    def leaf_means(self):
        return self.leaf_oracle_means

    def predict(self, X) -> np.ndarray:
        return self.leaf_oracle_means[self.partition.apply(X)]


class Forest:
    """Average of ``B`` valid trees evaluated on the full sample."""

    def __init__(self, trees: Sequence[ValidTree], header: Optional[dict] = None):
        trees = list(trees)
        if not trees:
            raise InvalidParams("a forest needs at least one tree")
        if len({t.d for t in trees}) != 1:
            raise InvalidParams("all trees of a forest must share d")
        self.trees = trees
        self.header = dict(header or {})

    @property
    def B(self) -> int:
        return len(self.trees)

    @property
    def d(self) -> int:
        return self.trees[0].d

    def predict(self, X) -> np.ndarray:
        total = np.zeros(np.atleast_2d(np.asarray(X, dtype=np.float64)).shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)

    def to_dict(self) -> dict:
        header = {"B": self.B, "d": self.d}
        header.update(self.header)
        return {"header": header, "trees": [t.to_dict() for t in self.trees]}

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Forest":
        header = dict(doc.get("header", {}))
        M = header.get("M")
        trees = [ValidTree.from_dict(t, M) for t in doc["trees"]]
        header.pop("B", None)
        header.pop("d", None)
        return cls(trees, header)

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls.from_dict(json.loads(text))


def dumps(doc) -> str:
    """Canonical JSON: sorted keys, shortest round-trip float repr, newline-terminated."""
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


# -- mean oracles -------------------------------------------------------------

@dataclass
class MeanOracle:
    """Access to ``E[Y | X in L]`` for the leaves of a partition.

    Exactly one of ``closed_form`` (``Rectangle -> float``) or ``mean_fn``
    (``(m, d) array -> (m,) array``) must be given. With ``mean_fn`` the leaf
    mean is estimated from ``n_mc`` draws of ``X`` restricted to the leaf. If
    ``sampler`` (``(rng, size) -> (size, d) array``) is given the draws come
    from rejection sampling; otherwise ``X`` is taken to be uniform and the
    draws are uniform on the leaf.
    """

    closed_form: Optional[Callable[[Rectangle], float]] = None
    mean_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sampler: Optional[Callable] = None
    n_mc: int = DEFAULT_N_MC
    seed: int = 0
    max_draws: int = 50_000_000

    def __post_init__(self):
        if (self.closed_form is None) == (self.mean_fn is None):
            raise InvalidParams("give exactly one of closed_form or mean_fn")
        if self.mean_fn is not None and self.n_mc < 1:
            raise InvalidParams("n_mc must be >= 1")

    @property
    def is_monte_carlo(self) -> bool:
        return self.mean_fn is not None

    def leaf_mean(self, R: Rectangle, leaf_id: int = 0) -> float:
        if self.closed_form is not None:
            return float(self.closed_form(R))
        rng = np.random.default_rng([self.seed, leaf_id])
        if self.sampler is None:
            pts = R.lo + (R.hi - R.lo) * rng.random((self.n_mc, R.d))
            return float(np.mean(self.mean_fn(pts)))
        kept: List[np.ndarray] = []
        have = drawn = 0
        batch = max(self.n_mc, 1024)
        while have < self.n_mc:
            if drawn >= self.max_draws:
                raise OracleUnavailable(
                    f"rejection sampler accepted {have} of {drawn} draws for leaf {leaf_id}")
            pts = np.asarray(self.sampler(rng, batch), dtype=np.float64)
            drawn += batch
            pts = pts[membership_mask(R, pts)]
            kept.append(pts)
            have += pts.shape[0]
        pts = np.concatenate(kept)[: self.n_mc]
        return float(np.mean(self.mean_fn(pts)))


# -- operations ---------------------------------------------------------------

def fit(P: Partition, D: Dataset) -> ValidTree:
    """Leaf means of ``Y`` over ``P``; raises :class:`InvalidPartition` if ``P`` is not valid."""
    verdict = validate(P, D)
    if not verdict.ok:
        raise InvalidPartition(verdict)
    return _fit_unchecked(P, D)


def _fit_unchecked(P: Partition, D: Dataset) -> ValidTree:
    ids = P.apply(D.X)
    L = P.n_leaves
    counts = np.bincount(ids, minlength=L)
    sums = np.bincount(ids, weights=D.Y, minlength=L)
    means = sums / counts
    return ValidTree(P, means, counts, D.M)


def optimal(P: Partition, oracle: MeanOracle) -> OptimalTree:
    means = [oracle.leaf_mean(leaf.region, i) for i, leaf in enumerate(P.leaves())]
    if oracle.is_monte_carlo:
        return OptimalTree(P, means, n_mc=oracle.n_mc, seed=oracle.seed)
    return OptimalTree(P, means)


def predict(T: Union[ValidTree, OptimalTree, Forest], x) -> Union[float, np.ndarray]:
    """Prediction at one point (returns a float) or at each row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    out = T.predict(x)
    return float(out[0]) if x.ndim == 1 else out


def sup_discrepancy(T: ValidTree, T_star: OptimalTree) -> float:
    """``sup_x |T(x) - T*(x)|``, which for piecewise-constant trees is a max over leaves."""
    if not T.partition.same_structure(T_star.partition):
        raise PartitionMismatch("trees are built on different partitions")
    return float(np.max(np.abs(T.leaf_means - T_star.leaf_oracle_means)))
