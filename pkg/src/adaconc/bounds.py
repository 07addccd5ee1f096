"""Closed-form concentration bounds and post-selection leaf intervals.

All logarithms are natural logarithms.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import List, NamedTuple

from .errors import InvalidParams

#: label attached to PoSI half-widths; they are a high-probability envelope, not a 95% CI
ENVELOPE_LABEL = "concentration envelope"


class LeafSizeWarning(UserWarning):
    """Leaf size looks too small for the asymptotic regime of the bounds."""


@dataclass(frozen=True)
class BoundParams:
    n: int
    d: int
    k: int
    alpha: float
    M: float = 1.0
    zeta: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InvalidParams(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        if not 1 <= self.k <= self.n:
            raise InvalidParams(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not 0.0 < self.alpha <= 0.5:
            raise InvalidParams(f"alpha must lie in (0, 0.5], got {self.alpha!r}")
        if not (self.M >= 0 and math.isfinite(self.M)):
            raise InvalidParams(f"M must be finite and >= 0, got {self.M!r}")
        if not self.zeta >= 1.0:
            raise InvalidParams(f"zeta must be >= 1, got {self.zeta!r}")

    @property
    def log_inv_one_minus_alpha(self) -> float:
        return -math.log1p(-self.alpha)

    @property
    def leaf_size_ratio(self) -> float:
        """``log(n) * max(log d, log log n) / k``; should be small."""
        if self.n < 3:
            return math.inf
        return math.log(self.n) * max(math.log(self.d), math.log(math.log(self.n))) / self.k

    def check_leaf_size(self, limit: float = 1.0) -> bool:
        ratio = self.leaf_size_ratio
        if ratio > limit:
            warnings.warn(
                f"log(n)*max(log d, log log n)/k = {ratio:.3g} > {limit}: leaf size k={self.k} "
                f"is small for n={self.n}, d={self.d}; bounds are asymptotic",
                LeafSizeWarning, stacklevel=2)
            return False
        return True


def adaptive_bound(p: BoundParams) -> float:
    """``9 M sqrt(log n log d / log(1/(1-alpha))) / sqrt(k)``."""
    radicand = math.log(p.n) * math.log(p.d) / p.log_inv_one_minus_alpha
    return 9.0 * p.M * math.sqrt(radicand) / math.sqrt(p.k)


def adaptive_bound_full(p: BoundParams) -> float:
    """``9 M sqrt(log(n/k) (log(dk) + 3 log log n) / log(1/(1-alpha))) / sqrt(k)``."""
    if p.n == p.k:
        return 0.0
    radicand = log_cardinality_bound(p.n, p.d, p.k, p.alpha)
    return 9.0 * p.M * math.sqrt(radicand) / math.sqrt(p.k)


def nonadaptive_bound(n: int, k: int, M: float) -> float:
    """Hoeffding baseline for a single tree chosen without looking at ``Y``."""
    if not 1 <= k <= n:
        raise InvalidParams(f"need 1 <= k <= n, got k={k}, n={n}")
    return M * math.sqrt(2.1 * math.log(n) / k)


def generalization_rate(n: int, d: int, k: int) -> float:
    """Order of the generalization gap, ``sqrt((log d + log n) / k)``.

    The constant is 1; only the rate is meaningful.
    """
    if n < 1 or d < 1 or k < 1:
        raise InvalidParams("n, d and k must be positive")
    return math.sqrt((math.log(d) + math.log(n)) / k)


def split_threshold(p: BoundParams) -> float:
    """Minimum score a split on a locked variable must reach: ``(2 * 9 M sqrt(...))**2``."""
    return (2.0 * adaptive_bound(p)) ** 2


class ApproxParams(NamedTuple):
    w: float
    eps: float


def approx_params(n: int, k: int, zeta: float = 1.0) -> ApproxParams:
    """Volume floor ``w = k / (2 zeta n)`` and tolerance ``eps = 1 / sqrt(k)``."""
    if not 1 <= k <= n:
        raise InvalidParams(f"need 1 <= k <= n, got k={k}, n={n}")
    if not zeta >= 1.0:
        raise InvalidParams(f"zeta must be >= 1, got {zeta!r}")
    return ApproxParams(k / (2.0 * zeta * n), 1.0 / math.sqrt(k))


def log_cardinality_bound(n: int, d: int, k: int, alpha: float) -> float:
    """Leading term of the log-size of the approximating rectangle family.

    The ``O(log max(n, d))`` remainder is not included.
    """
    if not 1 <= k <= n:
        raise InvalidParams(f"need 1 <= k <= n, got k={k}, n={n}")
    if d < 1 or not 0.0 < alpha <= 0.5:
        raise InvalidParams("need d >= 1 and alpha in (0, 0.5]")
    if n == k:
        return 0.0
    inner = math.log(d * k) + 3.0 * math.log(math.log(n))
    if inner < 0:
        raise InvalidParams(f"log(dk) + 3 log log n is negative for n={n}, d={d}, k={k}")
    return math.log(n / k) * inner / -math.log1p(-alpha)


# -- post-selection intervals ---------------------------------------------------

@dataclass(frozen=True)
class PosiRecord:
    leaf_id: int
    count: int
    mean: float
    half_width: float
    lower: float
    upper: float

    @property
    def excludes_zero(self) -> bool:
        return self.lower > 0.0 or self.upper < 0.0


@dataclass
class PosiReport:
    records: List[PosiRecord]
    half_width: float
    variant: str
    params: BoundParams
    label: str = ENVELOPE_LABEL
    warnings: List[str] = field(default_factory=list)

    CSV_COLUMNS = ("leaf_id", "count", "mean", "half_width", "lower", "upper", "excludes_zero")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        for r in self.records:
            writer.writerow([r.leaf_id, r.count, repr(r.mean), repr(r.half_width),
                             repr(r.lower), repr(r.upper), int(r.excludes_zero)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        p = self.params
        return {
            "label": self.label,
            "variant": self.variant,
            "half_width": self.half_width,
            "params": {"n": p.n, "d": p.d, "k": p.k, "alpha": p.alpha, "M": p.M, "zeta": p.zeta},
            "warnings": list(self.warnings),
            "leaves": [{"leaf_id": r.leaf_id, "count": r.count, "mean": r.mean,
                        "half_width": r.half_width, "lower": r.lower, "upper": r.upper,
                        "excludes_zero": r.excludes_zero} for r in self.records],
        }


def posi_intervals(T, p: BoundParams, variant: str = "simplified") -> PosiReport:
    """Attach the uniform adaptive half-width to every leaf mean of ``T``.

    Parameters
    ----------
    T : ValidTree
        A fitted tree; leaf counts are reported when available.
    p : BoundParams
        Problem size and response bound the tree was trained under.
    variant : {"simplified", "full"}
        Which closed form supplies the half-width.

    Returns
    -------
    PosiReport
        One record per leaf, ``mean ± half_width``, flagged when the interval
        excludes zero.
    """
    if variant == "simplified":
        h = adaptive_bound(p)
    elif variant == "full":
        h = adaptive_bound_full(p)
    else:
        raise InvalidParams(f"variant must be 'simplified' or 'full', got {variant!r}")
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        p.check_leaf_size()
    notes.extend(str(c.message) for c in caught)
    counts = T.leaf_counts if T.leaf_counts is not None else [-1] * len(T.leaf_means)
    records = [PosiRecord(i, int(c), float(m), h, float(m) - h, float(m) + h)
               for i, (c, m) in enumerate(zip(counts, T.leaf_means))]
    return PosiReport(records, h, variant, p, warnings=notes)
