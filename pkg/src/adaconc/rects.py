"""Dyadic families of rectangles that sandwich every large sparse rectangle.

For a support set ``S`` of size ``s``, a volume floor ``w`` and a tolerance
``eps``, every axis ``j`` in ``S`` of a family member is an interval

    lo = a * 2**(tau - 1) * w * eps / s
    hi = min(1, lo + w * 2**tau + b * 2**(tau - 1) * w * eps / s)

with ``0 <= tau <= floor(log2(1/w))``, ``0 <= a <= floor(2**(1-tau) s/(w eps))``,
``0 <= b <= ceil(2 s / eps)`` and ``sum(tau) >= (s - 1) log2(1/w) - s``. Axes
outside ``S`` span ``[0, 1]``.

Grid arithmetic is exact (``fractions.Fraction`` built from the decimal
representation of ``w`` and ``eps``); materialized rectangles are the
correctly rounded floats of the exact grid values. Intervals that collapse to
the single point ``{1}`` are not rectangles and are dropped.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .core import Rectangle, support, volume
from .errors import (CounterOutOfRange, EnumerationTooLarge, InvalidParams, NoApproximant,
                     SupportMismatch, VolumeTooSmall)

DEFAULT_CAP = 10**7
_MAX_TAU_COMBOS = 10**6


def _exact(x: float) -> Fraction:
    return Fraction(str(x))


@dataclass(frozen=True)
class ApproxFamilyParams:
    """Parameters of the family ``R_{S, w, eps}``; ``d`` defaults to ``max(S) + 1``."""

    S: Tuple[int, ...]
    w: float
    eps: float
    d: Optional[int] = None

    def __post_init__(self):
        S = tuple(sorted({int(j) for j in self.S}))
        if not S or S[0] < 0:
            raise InvalidParams("S must be a non-empty set of non-negative axes")
        if not (0.0 < self.w < 1.0 and 0.0 < self.eps <= 1.0):
            raise InvalidParams(f"need w in (0, 1) and eps in (0, 1], got w={self.w}, eps={self.eps}")
        d = S[-1] + 1 if self.d is None else int(self.d)
        if d <= S[-1]:
            raise InvalidParams(f"d={d} too small for support {S}")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "d", d)

    @classmethod
    def for_size(cls, s: int, w: float, eps: float, d: Optional[int] = None):
        return cls(tuple(range(s)), w, eps, d)

    @property
    def s(self) -> int:
        return len(self.S)

    @cached_property
    def W(self) -> Fraction:
        return _exact(self.w)

    @cached_property
    def E(self) -> Fraction:
        return _exact(self.eps)

    @cached_property
    def tau_max(self) -> int:
        t = 0
        while self.W * 2 ** (t + 1) <= 1:
            t += 1
        return t

    @cached_property
    def _scale(self) -> Tuple[int, int, int]:
        """Integers ``(D, U, Wn)`` with finest step ``w eps / (2 s) = U / D`` and ``w = Wn / D``."""
        u0 = self.W * self.E / (2 * self.s)
        D = u0.denominator * self.W.denominator // math.gcd(u0.denominator, self.W.denominator)
        return D, u0.numerator * (D // u0.denominator), self.W.numerator * (D // self.W.denominator)

    def unit(self, tau: int) -> Fraction:
        """Grid step ``2**(tau-1) w eps / s`` at scale ``tau``."""
        D, U, _ = self._scale
        return Fraction(U << tau, D)

    def a_max(self, tau: int) -> int:
        D, U, _ = self._scale
        return D // (U << tau)

    @cached_property
    def b_max(self) -> int:
        return math.ceil(2 * self.s / self.E)

    @cached_property
    def tau_sum_min(self) -> float:
        return (self.s - 1) * math.log2(1 / self.w) - self.s

    def base_width(self, tau: int) -> Fraction:
        return self.W * 2 ** tau

    def interval_num(self, tau: int, a: int, b: int) -> Tuple[int, int]:
        """Numerators over ``D`` of the interval ends; exact integers."""
        D, U, Wn = self._scale
        lo = (a * U) << tau
        hi = lo + (Wn << tau) + ((b * U) << tau)
        return lo, (hi if hi < D else D)

    def interval(self, tau: int, a: int, b: int) -> Tuple[Fraction, Fraction]:
        D = self._scale[0]
        lo, hi = self.interval_num(tau, a, b)
        return Fraction(lo, D), Fraction(hi, D)

    def feasible_taus(self) -> Iterator[Tuple[int, ...]]:
        for taus in itertools.product(range(self.tau_max + 1), repeat=self.s):
            if sum(taus) >= self.tau_sum_min:
                yield taus


@dataclass(frozen=True)
class GridRectangle:
    """Counter tuple ``(tau_j, a_j, b_j)`` for each axis of ``S`` in sorted order."""

    counters: Tuple[Tuple[int, int, int], ...]

    def check(self, p: ApproxFamilyParams) -> None:
        if len(self.counters) != p.s:
            raise CounterOutOfRange(f"expected {p.s} counter triples, got {len(self.counters)}")
        for j, (tau, a, b) in zip(p.S, self.counters):
            if not 0 <= tau <= p.tau_max:
                raise CounterOutOfRange(f"axis {j}: tau={tau} outside [0, {p.tau_max}]")
            if not 0 <= a <= p.a_max(tau):
                raise CounterOutOfRange(f"axis {j}: a={a} outside [0, {p.a_max(tau)}]")
            if not 0 <= b <= p.b_max:
                raise CounterOutOfRange(f"axis {j}: b={b} outside [0, {p.b_max}]")
        if sum(c[0] for c in self.counters) < p.tau_sum_min:
            raise CounterOutOfRange(
                f"sum of tau {sum(c[0] for c in self.counters)} below {p.tau_sum_min:.4g}")

    def exact_bounds(self, p: ApproxFamilyParams) -> Tuple[Tuple[Fraction, Fraction], ...]:
        return tuple(p.interval(*c) for c in self.counters)


def materialize(g: GridRectangle, p: ApproxFamilyParams) -> Rectangle:
    """The rectangle in ``[0, 1]^d`` described by the counters of ``g``."""
    g.check(p)
    lo = np.zeros(p.d)
    hi = np.ones(p.d)
    D = p._scale[0]
    for j, c in zip(p.S, g.counters):
        elo, ehi = p.interval_num(*c)
        if elo >= ehi:
            raise CounterOutOfRange(f"axis {j}: interval collapses to the point {elo / D}")
        lo[j] = elo / D
        hi[j] = ehi / D
    return Rectangle(lo, hi)


# -- enumeration and counting ---------------------------------------------------

def axis_intervals(p: ApproxFamilyParams) -> Dict[Tuple[int, int], Tuple[int, int, int]]:
    """Distinct non-degenerate 1-d intervals (numerators over the common denominator),
    each mapped to the counter with the largest tau."""
    out: Dict[Tuple[Fraction, Fraction], Tuple[int, int, int]] = {}
    for tau in range(p.tau_max + 1):
        for a in range(p.a_max(tau) + 1):
            for b in range(p.b_max + 1):
                iv = p.interval_num(tau, a, b)
                if iv[0] < iv[1]:
                    out[iv] = (tau, a, b)
    return out


def tuple_count(p: ApproxFamilyParams) -> int:
    """Number of admissible counter tuples before geometric deduplication."""
    per_tau = [(p.a_max(t) + 1) * (p.b_max + 1) for t in range(p.tau_max + 1)]
    return sum(math.prod(per_tau[t] for t in taus) for taus in p.feasible_taus())


def count_family(p: ApproxFamilyParams) -> int:
    """Exact number of distinct rectangles in the family.

    A tuple of intervals belongs to the family iff choosing, per axis, the
    largest scale that produces the interval meets the constraint on
    ``sum(tau)``; so the count factorizes over per-axis interval counts
    grouped by that largest scale.
    """
    by_tau = [0] * (p.tau_max + 1)
    for tau, _, _ in axis_intervals(p).values():
        by_tau[tau] += 1
    return sum(math.prod(by_tau[t] for t in taus) for taus in p.feasible_taus())


def enumerate_family(p: ApproxFamilyParams, cap: int = DEFAULT_CAP) -> Iterator[GridRectangle]:
    """Yield every family member once (deduplicated by materialized geometry)."""
    bound = cardinality_bound(p.s, p.w, p.eps)
    if bound > cap:
        raise EnumerationTooLarge(f"cardinality bound {bound:.3g} exceeds cap {cap}")
    n_tuples = tuple_count(p)
    if n_tuples > cap:
        raise EnumerationTooLarge(f"{n_tuples} counter tuples exceed cap {cap}")
    per_tau = []
    for tau in range(p.tau_max + 1):
        cells = []
        for a in range(p.a_max(tau) + 1):
            for b in range(p.b_max + 1):
                iv = p.interval_num(tau, a, b)
                if iv[0] < iv[1]:
                    cells.append(((tau, a, b), iv))
        per_tau.append(cells)
    seen = set()
    for taus in p.feasible_taus():
        for combo in itertools.product(*(per_tau[t] for t in taus)):
            key = tuple(iv for _, iv in combo)
            if key in seen:
                continue
            seen.add(key)
            yield GridRectangle(tuple(c for c, _ in combo))


# `enumerate` is the operation name used by callers; keep the builtin intact elsewhere
def enumerate(p: ApproxFamilyParams, cap: int = DEFAULT_CAP) -> List[GridRectangle]:  # noqa: A001
    return list(enumerate_family(p, cap))


# -- approximation ----------------------------------------------------------------

@dataclass(frozen=True)
class Approximation:
    inner: Rectangle
    outer: Rectangle
    inner_grid: GridRectangle
    outer_grid: GridRectangle


def _lo_f(p, tau, a):
    return p.interval_num(tau, a, 0)[0] / p._scale[0]


def _hi_f(p, tau, a, b):
    return p.interval_num(tau, a, b)[1] / p._scale[0]


def _outer_axis(p: ApproxFamilyParams, tau: int, r_lo: float, r_hi: float):
    D, U, Wn = p._scale
    step = U << tau
    a_max = p.a_max(tau)
    # float guesses, then exact correction against the rounded grid values
    a = min(max(0, math.floor(r_lo * D / step)), a_max)
    while a + 1 <= a_max and _lo_f(p, tau, a + 1) <= r_lo:
        a += 1
    while a > 0 and _lo_f(p, tau, a) > r_lo:
        a -= 1
    if a * step >= D:
        a -= 1
    b = max(0, math.ceil((r_hi * D - a * step - (Wn << tau)) / step))
    b = min(b, p.b_max + 1)
    while b > 0 and _hi_f(p, tau, a, b - 1) >= r_hi:
        b -= 1
    while b <= p.b_max and _hi_f(p, tau, a, b) < r_hi:
        b += 1
    if b > p.b_max:
        return None
    return (tau, a, b)


def _inner_axis(p: ApproxFamilyParams, tau: int, r_lo: float, r_hi: float):
    D, U, Wn = p._scale
    step = U << tau
    a_max = p.a_max(tau)
    a = min(max(0, math.ceil(r_lo * D / step)), a_max + 1)
    while a > 0 and _lo_f(p, tau, a - 1) >= r_lo:
        a -= 1
    while a <= a_max and _lo_f(p, tau, a) < r_lo:
        a += 1
    if a > a_max or a * step >= D:
        return None
    if _hi_f(p, tau, a, 0) > r_hi:
        return None
    b = min(p.b_max, max(0, math.floor((r_hi * D - a * step - (Wn << tau)) / step)))
    while b < p.b_max and _hi_f(p, tau, a, b + 1) <= r_hi:
        b += 1
    while b > 0 and _hi_f(p, tau, a, b) > r_hi:
        b -= 1
    return (tau, a, b)


def _width(p, c):
    lo, hi = p.interval_num(*c)
    D = p._scale[0]
    return hi / D - lo / D


def _select(p: ApproxFamilyParams, options, preferred, better):
    """Pick one counter per axis, meeting the tau-sum constraint, optimising the volume."""
    if math.prod(len(o) for o in options) > _MAX_TAU_COMBOS:
        options = [[c for c in o if c[0] == t] or o for o, t in zip(options, preferred)]
    # preferred scale first on every axis so that it wins ties
    options = [sorted(((c, _width(p, c)) for c in o), key=lambda cw: cw[0][0] != t)
               for o, t in zip(options, preferred)]
    best = None
    best_vol = None
    for combo in itertools.product(*options):
        if sum(c[0] for c, _ in combo) < p.tau_sum_min:
            continue
        vol = math.prod(wd for _, wd in combo)
        if best is None or better(vol, best_vol):
            best, best_vol = tuple(c for c, _ in combo), vol
    return best


def approximate(R: Rectangle, p: ApproxFamilyParams) -> Approximation:
    """Inner and outer family members with ``inner ⊆ R ⊆ outer``.

    Per axis and scale the counters follow the constructive rule (largest
    grid ``lo <= r_lo`` and smallest matching ``hi >= r_hi`` for the outer
    rectangle, mirrored for the inner one). The preferred scale is
    ``floor(log2((r_hi - r_lo) / w))``; other admissible scales are also
    tried and the tightest volume wins, ties going to the preferred scale.

    Raises
    ------
    SupportMismatch
        ``R`` constrains an axis outside ``S``.
    VolumeTooSmall
        ``volume(R) < w``.
    NoApproximant
        No family member fits inside (or around) ``R``.
    """
    if R.d != p.d:
        raise InvalidParams(f"rectangle has d={R.d}, family has d={p.d}")
    extra = support(R) - set(p.S)
    if extra:
        raise SupportMismatch(f"rectangle constrains axes {sorted(extra)} outside S={p.S}")
    if volume(R) < p.w:
        raise VolumeTooSmall(f"volume {volume(R):.6g} below w={p.w}")
    preferred = []
    outer_opts = []
    inner_opts = []
    for j in p.S:
        r_lo, r_hi = float(R.lo[j]), float(R.hi[j])
        tau0 = min(p.tau_max, max(0, math.floor(math.log2((r_hi - r_lo) / p.w))))
        preferred.append(tau0)
        outs = [c for c in (_outer_axis(p, t, r_lo, r_hi) for t in range(p.tau_max + 1)) if c]
        ins = [c for c in (_inner_axis(p, t, r_lo, r_hi) for t in range(p.tau_max + 1)) if c]
        if not outs:
            raise NoApproximant(f"no outer interval on axis {j} for [{r_lo}, {r_hi}]")
        if not ins:
            raise NoApproximant(f"no inner interval on axis {j} for [{r_lo}, {r_hi}]")
        outer_opts.append(outs)
        inner_opts.append(ins)
    outer = _select(p, outer_opts, preferred, lambda v, best: v < best)
    inner = _select(p, inner_opts, preferred, lambda v, best: v > best)
    if outer is None:
        raise NoApproximant("no outer approximant meets the tau-sum constraint")
    if inner is None:
        raise NoApproximant("no inner approximant meets the tau-sum constraint")
    g_in, g_out = GridRectangle(tuple(inner)), GridRectangle(tuple(outer))
    return Approximation(materialize(g_in, p), materialize(g_out, p), g_in, g_out)


def sandwich_holds(R: Rectangle, approx: Approximation, eps: float) -> Tuple[bool, bool, bool]:
    """(containment, outer volume inequality, inner volume inequality)."""
    contain = approx.outer.contains_rect(R) and R.contains_rect(approx.inner)
    vol = volume(R)
    outer_ok = math.exp(-eps) * volume(approx.outer) <= vol
    inner_ok = vol <= math.exp(eps) * volume(approx.inner)
    return contain, outer_ok, inner_ok


# -- cardinality --------------------------------------------------------------------

def cardinality_bound(s: int, w: float, eps: float) -> float:
    """Leading term ``(1/w) (8 s^2 / eps^2 (1 + log2 floor(1/w)))**s`` (the 1+O(eps) factor omitted)."""
    if s < 1 or not (0 < w < 1) or not (0 < eps <= 1):
        raise InvalidParams("need s >= 1, w in (0, 1), eps in (0, 1]")
    return (1.0 / w) * (8.0 * s * s / eps**2 * (1.0 + math.log2(math.floor(1.0 / w)))) ** s


def log_binom(d: int, s: int) -> float:
    return math.lgamma(d + 1) - math.lgamma(s + 1) - math.lgamma(d - s + 1)


def union_family_log_size(s: int, w: float, eps: float, d: int) -> float:
    """Log-size bound of the union of families over all supports of size ``s``."""
    if not 1 <= s <= d:
        raise InvalidParams(f"need 1 <= s <= d, got s={s}, d={d}")
    return log_binom(d, s) + math.log(cardinality_bound(s, w, eps))


def random_admissible_rectangle(rng: np.random.Generator, p: ApproxFamilyParams,
                                full_prob: float = 0.15, edge_prob: float = 0.15) -> Rectangle:
    """Random rectangle with support inside ``S`` and volume at least ``w``.

    The log-volume is drawn uniformly on ``[log w, 0]`` and shared across the
    axes of ``S`` by a Dirichlet split; some axes are left full or pushed
    against an edge so that clamping paths get exercised.
    """
    lo = np.zeros(p.d)
    hi = np.ones(p.d)
    log_v = rng.uniform(math.log(p.w), 0.0)
    shares = rng.dirichlet(np.ones(p.s))
    for j, share in zip(p.S, shares):
        if rng.random() < full_prob:
            continue
        e = math.exp(log_v * share)
        if e >= 1.0:
            continue
        u = rng.random()
        if u < edge_prob / 2:
            start = 0.0
        elif u < edge_prob:
            start = 1.0 - e
        else:
            start = rng.uniform(0.0, 1.0 - e)
        lo[j] = start
        hi[j] = min(1.0, start + e)
    R = Rectangle(lo, hi)
    if volume(R) < p.w:
        return random_admissible_rectangle(rng, p, full_prob, edge_prob)
    return R


def families_for_sizes(sizes: Sequence[int], ws: Sequence[float], epss: Sequence[float]):
    return [ApproxFamilyParams.for_size(s, w, e) for s in sizes for w in ws for e in epss]
