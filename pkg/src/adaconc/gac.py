"""Guess-and-check trees and forests.

Each tree repeatedly takes a node off a FIFO frontier, draws one axis
uniformly at random, and finds the best admissible split on it. The split is
kept if the axis is already unlocked in this tree, or if its score clears the
adaptive threshold, in which case the axis becomes unlocked. ``alpha=0.5``
selects the median variant, which always splits at the (lower) median.
"""

from __future__ import annotations

import enum
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .bounds import BoundParams, split_threshold
from .core import Dataset, Rectangle
from .errors import DatasetTooSmall, EmptySide, InvalidParams, InvalidPartition
from .partition import Partition, SplitNode, min_child_count, split, validate
from .trees import Forest, ValidTree, _fit_unchecked


@dataclass(frozen=True)
class GacConfig:
    """Training parameters.

    Parameters
    ----------
    k : int
        Minimum leaf size; nodes with fewer than ``2k`` points are not split.
    alpha : float
        Balance parameter in ``(0, 0.5]``; ``0.5`` selects the median variant.
    M : float
        Response bound used in the split threshold.
    B : int
        Number of trees in a forest.
    max_attempts_per_node : int
        A node is retired after this many consecutive unsuccessful draws.
    seed : int
        Master seed; tree ``b`` uses a stream derived from ``(seed, b)``.
    threshold_scale : float
        Multiplier on the adaptive split threshold. The default ``1.0`` is the
        guarantee-carrying threshold; other values exist for diagnostics.
    """

    k: int
    alpha: float
    M: float
    B: int = 1
    max_attempts_per_node: int = 10
    seed: int = 0
    threshold_scale: float = 1.0

    def __post_init__(self):
        if self.k < 1 or self.B < 1 or self.max_attempts_per_node < 1:
            raise InvalidParams("k, B and max_attempts_per_node must be >= 1")
        if not 0.0 < self.alpha <= 0.5:
            raise InvalidParams(f"alpha must lie in (0, 0.5], got {self.alpha!r}")
        if not self.M > 0:
            raise InvalidParams(f"M must be > 0, got {self.M!r}")
        if not (0 <= self.seed < 2**64):
            raise InvalidParams("seed must be a 64-bit unsigned integer")
        if not self.threshold_scale >= 0:
            raise InvalidParams("threshold_scale must be >= 0")

    @property
    def median(self) -> bool:
        return self.alpha == 0.5

    def threshold(self, n: int, d: int) -> float:
        """Score a locked axis must reach: ``threshold_scale * (2 * adaptive_bound)**2``."""
        return self.threshold_scale * split_threshold(BoundParams(n, d, min(self.k, n), self.alpha, self.M))

    def to_dict(self) -> dict:
        return {"k": self.k, "alpha": self.alpha, "M": self.M, "B": self.B,
                "max_attempts_per_node": self.max_attempts_per_node, "seed": self.seed,
                "threshold_scale": self.threshold_scale}


@dataclass(frozen=True)
class SplitCandidate:
    theta_hat: float
    score: float
    n_minus: int
    n_plus: int
    delta: float


class SplitDecision(enum.Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    INADMISSIBLE = "inadmissible"


@dataclass
class Attempt:
    node: str
    axis: int
    decision: SplitDecision
    score: Optional[float]
    unlocked_before: bool


@dataclass
class GacState:
    """Per-tree mutable training state.

    ``first_attempt[j]`` records whether the first scored attempt on axis
    ``j`` (one with an admissible threshold) was accepted.
    """

    d: int
    threshold: float
    unlocked: set = field(default_factory=set)
    frontier: deque = field(default_factory=deque)
    first_attempt: Dict[int, bool] = field(default_factory=dict)
    attempts: List[Attempt] = field(default_factory=list)

    def split_axes(self) -> set:
        return {a.axis for a in self.attempts if a.decision is SplitDecision.ACCEPTED}


def _as_rows(rows) -> np.ndarray:
    rows = np.asarray(rows)
    if rows.dtype == bool:
        return np.flatnonzero(rows)
    return rows.astype(np.int64, copy=False)


def score_split(rows, j: int, theta: float, D: Dataset) -> SplitCandidate:
    """Score ``ell = 4 N- N+ / (N- + N+)**2 * delta**2`` of cutting ``rows`` at ``theta``.

    ``delta`` is the mean of ``Y`` above ``theta`` minus the mean at or below it.

    Raises
    ------
    EmptySide
        One side of the cut has no points.
    """
    rows = _as_rows(rows)
    left = D.X[rows, j] <= theta
    n_minus = int(np.count_nonzero(left))
    n_plus = rows.size - n_minus
    if n_minus == 0 or n_plus == 0:
        raise EmptySide(f"cut at {theta!r} on axis {j} leaves a side empty")
    y = D.Y[rows]
    delta = float(np.mean(y[~left]) - np.mean(y[left]))
    m = n_minus + n_plus
    return SplitCandidate(float(theta), 4.0 * n_minus * n_plus / (m * m) * delta * delta,
                          n_minus, n_plus, delta)


def best_split(rows, j: int, D: Dataset, cfg: GacConfig,
               region: Optional[Rectangle] = None) -> Optional[SplitCandidate]:
    """Highest-scoring admissible threshold on axis ``j``, or ``None``.

    Thresholds range over sample values of the node. A threshold is
    admissible when both sides keep at least ``max(ceil(alpha m), k)``
    points and it lies strictly inside the node's region. Ties go to the
    smallest threshold. The median variant only considers the ``floor(m/2)``-th
    order statistic.
    """
    rows = _as_rows(rows)
    m = rows.size
    if m < 2:
        return None
    lo = -np.inf if region is None else region.lo[j]
    need = max(min_child_count(cfg.alpha, m), cfg.k)
    x = D.X[rows, j]
    if cfg.median:
        # floor(m/2)-th order statistic, 1-based
        i = m // 2 - 1
        theta = float(np.partition(x, i)[i])
        if not theta > lo:
            return None
        n_minus = int(np.count_nonzero(x <= theta))
        if min(n_minus, m - n_minus) < need:
            return None
        return score_split(rows, j, theta, D)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cs = np.cumsum(D.Y[rows][order])
    # cut after position i keeps xs[:i+1] on the left; only where the value changes
    i = np.flatnonzero(xs[:-1] < xs[1:])
    n_minus = i + 1
    n_plus = m - n_minus
    ok = (n_minus >= need) & (n_plus >= need) & (xs[i] > lo)
    i, n_minus, n_plus = i[ok], n_minus[ok], n_plus[ok]
    if i.size == 0:
        return None
    total = cs[-1]
    delta = (total - cs[i]) / n_plus - cs[i] / n_minus
    ell = 4.0 * n_minus * n_plus / float(m * m) * delta * delta
    b = int(np.argmax(ell))
    return SplitCandidate(float(xs[i[b]]), float(ell[b]), int(n_minus[b]), int(n_plus[b]),
                          float(delta[b]))


def try_split(rows, node: SplitNode, j: int, D: Dataset, cfg: GacConfig, state: GacState,
              name: str = "") -> Tuple[SplitDecision, Optional[SplitCandidate]]:
    """One guess-and-check attempt on axis ``j``; splits ``node`` in place when accepted."""
    cand = best_split(rows, j, D, cfg, node.region)
    unlocked = j in state.unlocked
    if cand is None:
        state.attempts.append(Attempt(name, j, SplitDecision.INADMISSIBLE, None, unlocked))
        return SplitDecision.INADMISSIBLE, None
    accepted = unlocked or cand.score >= state.threshold
    decision = SplitDecision.ACCEPTED if accepted else SplitDecision.REJECTED
    state.first_attempt.setdefault(j, accepted)
    state.attempts.append(Attempt(name, j, decision, cand.score, unlocked))
    if accepted:
        split(node, j, cand.theta_hat)
        state.unlocked.add(j)
    return decision, cand


def grow_tree(D: Dataset, cfg: GacConfig, rng: np.random.Generator,
              threshold: Optional[float] = None) -> Tuple[ValidTree, GacState]:
    """Train one tree and return it with its training state."""
    if D.n < cfg.k:
        raise DatasetTooSmall(f"n={D.n} is below the leaf size k={cfg.k}")
    if threshold is None:
        threshold = cfg.threshold(D.n, D.d)
    root = SplitNode(Rectangle.unit(D.d))
    state = GacState(D.d, threshold)
    if D.n >= 2 * cfg.k:
        state.frontier.append((root, np.arange(D.n), "", 0))
    while state.frontier:
        node, rows, name, misses = state.frontier.popleft()
        j = int(rng.integers(D.d))
        decision, _ = try_split(rows, node, j, D, cfg, state, name)
        if decision is SplitDecision.ACCEPTED:
            go_left = D.X[rows, node.axis] <= node.threshold
            for child, sub, tag in ((node.left, rows[go_left], "L"),
                                    (node.right, rows[~go_left], "R")):
                if sub.size >= 2 * cfg.k:
                    state.frontier.append((child, sub, name + tag, 0))
        elif misses + 1 < cfg.max_attempts_per_node:
            state.frontier.append((node, rows, name, misses + 1))
    P = Partition(root, cfg.alpha, cfg.k)
    verdict = validate(P, D)
    if not verdict.ok:
        raise InvalidPartition(verdict)
    return _fit_unchecked(P, D), state


def train_tree(D: Dataset, cfg: GacConfig, rng: np.random.Generator) -> ValidTree:
    return grow_tree(D, cfg, rng)[0]


def tree_seed(master: int, index: int) -> int:
    """Stable 64-bit seed for tree ``index`` of a forest."""
    return int(np.random.SeedSequence([master, index]).generate_state(1, np.uint64)[0])


def train_forest(D: Dataset, cfg: GacConfig, threads: int = 1,
                 return_states: bool = False):
    """Train ``cfg.B`` independent trees; the result does not depend on ``threads``.

    Returns
    -------
    Forest, or (Forest, list of GacState) when ``return_states`` is set.
    """
    threshold = cfg.threshold(D.n, D.d)
    seeds = [tree_seed(cfg.seed, b) for b in range(cfg.B)]

    def one(seed):
        return grow_tree(D, cfg, np.random.default_rng(seed), threshold)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    header = cfg.to_dict()
    header.update({"n": D.n, "threshold": threshold, "tree_seeds": seeds})
    forest = Forest([t for t, _ in results], header)
    if return_states:
        return forest, [s for _, s in results]
    return forest
