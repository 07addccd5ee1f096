"""Geometric and data primitives: rectangles, datasets, counting."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidDataset, InvalidParams, InvalidRectangle


class MembershipRule(enum.Enum):
    """Boundary semantics for deciding whether a point lies in a rectangle.

    ``SPLIT`` mirrors recursive partitioning: children are ``x_j <= tau`` and
    ``x_j > tau``, so every interval is open at its lower end except when the
    lower end is 0, and closed at its upper end. Leaves of a partition are then
    exactly disjoint and exhaustive. ``CLOSED`` treats every interval as
    ``[lo, hi]``.
    """

    SPLIT = "split"
    CLOSED = "closed"


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Rectangle:
    """Axis-aligned box ``prod_j [lo[j], hi[j]]`` inside the unit cube."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=np.float64).ravel()
        hi = np.array(self.hi, dtype=np.float64).ravel()
        if lo.shape != hi.shape or lo.size == 0:
            raise InvalidRectangle("lo and hi must be non-empty and of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidRectangle("rectangle bounds must be finite")
        if np.any(lo < 0.0) or np.any(hi > 1.0):
            raise InvalidRectangle("rectangle must lie inside [0, 1]^d")
        bad = np.flatnonzero(~(lo < hi))
        if bad.size:
            j = int(bad[0])
            raise InvalidRectangle(
                f"degenerate axis {j}: lo={lo[j]!r} is not below hi={hi[j]!r}")
        object.__setattr__(self, "lo", _frozen(lo))
        object.__setattr__(self, "hi", _frozen(hi))

    @classmethod
    def unit(cls, d: int) -> "Rectangle":
        return cls(np.zeros(d), np.ones(d))

    @property
    def d(self) -> int:
        return self.lo.size

    def volume(self) -> float:
        return volume(self)

    def support(self) -> frozenset:
        return support(self)

    def contains_rect(self, other: "Rectangle") -> bool:
        """Closed-set containment ``other ⊆ self``."""
        return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))

    def with_axis(self, j: int, lo: float, hi: float) -> "Rectangle":
        new_lo = self.lo.copy()
        new_hi = self.hi.copy()
        new_lo[j] = lo
        new_hi[j] = hi
        return Rectangle(new_lo, new_hi)

    def __eq__(self, other):
        if not isinstance(other, Rectangle):
            return NotImplemented
        return bool(np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi))

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        axes = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in zip(self.lo, self.hi))
        return f"Rectangle({axes})"


def volume(R: Rectangle) -> float:
    """Lebesgue measure of ``R``."""
    return float(np.prod(R.hi - R.lo))


def support(R: Rectangle) -> frozenset:
    """Axes on which ``R`` is constrained, i.e. ``lo != 0`` or ``hi != 1``."""
    return frozenset(int(j) for j in np.flatnonzero((R.lo != 0.0) | (R.hi != 1.0)))


@dataclass(frozen=True)
class DensityEnvelope:
    """Bounds ``1/zeta <= f(x) <= zeta`` on the feature density."""

    zeta: float = 1.0

    def __post_init__(self):
        if not self.zeta >= 1.0:
            raise InvalidParams(f"zeta must be >= 1, got {self.zeta!r}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Features in ``[0, 1]^d`` with responses bounded by ``M``.

    ``M`` defaults to ``max |Y_i|`` when not given. Arrays are stored
    read-only.
    """

    X: np.ndarray
    Y: np.ndarray
    M: Optional[float] = field(default=None)

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        Y = np.array(self.Y, dtype=np.float64).ravel()
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise InvalidDataset("X must be a 2-d array")
        n, d = X.shape
        if n < 1 or d < 1:
            raise InvalidDataset("need n >= 1 and d >= 1")
        if Y.size != n:
            raise InvalidDataset(f"X has {n} rows but Y has {Y.size} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InvalidDataset("non-finite values in dataset")
        bad = np.argwhere((X < 0.0) | (X > 1.0))
        if bad.size:
            i, j = (int(v) for v in bad[0])
            raise InvalidDataset(f"feature X[{i}, {j}]={X[i, j]!r} outside [0, 1]")
        M = float(np.max(np.abs(Y))) if self.M is None else float(self.M)
        if M < 0 or not np.isfinite(M):
            raise InvalidDataset(f"response bound M must be finite and >= 0, got {M!r}")
        over = np.flatnonzero(np.abs(Y) > M)
        if over.size:
            i = int(over[0])
            raise InvalidDataset(f"|Y[{i}]|={abs(Y[i])!r} exceeds M={M!r}")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "Y", _frozen(Y))
        object.__setattr__(self, "M", M)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def membership_mask(R: Rectangle, X: np.ndarray,
                    rule: MembershipRule = MembershipRule.SPLIT) -> np.ndarray:
    """Boolean mask of rows of ``X`` lying in ``R`` under ``rule``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    upper = X <= R.hi
    if rule is MembershipRule.CLOSED:
        lower = X >= R.lo
    else:
        lower = (X > R.lo) | ((R.lo == 0.0) & (X >= 0.0))
    return np.all(lower & upper, axis=1)


def count_points(R: Rectangle, D: Dataset,
                 convention: MembershipRule = MembershipRule.SPLIT) -> int:
    """Number of training points of ``D`` inside ``R``."""
    if R.d != D.d:
        raise InvalidParams(f"rectangle has d={R.d} but dataset has d={D.d}")
    return int(np.count_nonzero(membership_mask(R, D.X, convention)))


def rank_transform_matrix(X: np.ndarray) -> np.ndarray:
    """Replace each column by ``(rank - 0.5) / n`` using average ranks on ties."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n = X.shape[0]
    ranks = rankdata(X, method="average", axis=0)
    return (ranks - 0.5) / n


def rank_transform(D: Dataset) -> Dataset:
    """Rank-transform the features of ``D``; responses and ``M`` are kept."""
    return Dataset(rank_transform_matrix(D.X), D.Y, D.M)


def dataset_from_raw(X: Sequence, Y: Sequence, M: Optional[float] = None,
                     rank: bool = False) -> Dataset:
    """Build a :class:`Dataset`, rank-transforming arbitrary real features if asked."""
    X = np.asarray(X, dtype=np.float64)
    if rank:
        X = rank_transform_matrix(X)
    return Dataset(X, Y, M)
