"""Exact rational interval sets and invertible piecewise-affine maps.

Every set is a finite union of half-open intervals ``[lo, hi)`` with
:class:`fractions.Fraction` endpoints, and every map is a finite list of
affine pieces ``x -> slope * x + offset`` with positive rational slope.
Nothing here ever rounds.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Iterator, Sequence

Rat = Fraction


class ExactError(Exception):
    """Base class for errors raised by the exact core."""

    code = "EXACT"


class PointOutsideDomain(ExactError):
    code = "POINT_OUTSIDE_DOMAIN"


class SetOutsideDomain(ExactError):
    code = "SET_OUTSIDE_DOMAIN"


class DomainMismatch(ExactError):
    code = "DOMAIN_MISMATCH"


class PieceBudgetExceeded(ExactError):
    code = "PIECE_BUDGET"


class InvalidMap(ExactError):
    code = "INVALID_MAP"


def rat(value) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not accepted; pass an int, Fraction or 'p/q' string")
    return Fraction(value)


def format_rat(q: Fraction) -> str:
    """Canonical text form: ``p/q`` in lowest terms, ``p`` when q == 1."""
    q = rat(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def parse_rat(text: str) -> Fraction:
    text = text.strip()
    if "." in text or "e" in text.lower():
        raise ValueError(f"not an exact rational: {text!r}")
    return Fraction(text)


def lcm(a: int, b: int) -> int:
    return a // gcd(a, b) * b


@dataclass
class PieceBudget:
    max_pieces: int = 1_000_000

    def check(self, count: int, what: str = "map") -> None:
        if count > self.max_pieces:
            raise PieceBudgetExceeded(
                f"{what} needs {count} pieces, budget is {self.max_pieces}")


DEFAULT_BUDGET = PieceBudget()


def set_default_budget(max_pieces: int) -> None:
    DEFAULT_BUDGET.max_pieces = int(max_pieces)


@dataclass(frozen=True, order=True)
class Interval:
    """Half-open interval ``[lo, hi)`` with ``lo < hi``."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = rat(self.lo), rat(self.hi)
        if not lo < hi:
            raise ValueError(f"empty or reversed interval [{lo}, {hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo <= x < self.hi

    def as_set(self) -> "IntervalSet":
        return IntervalSet(((self.lo, self.hi),), _normalized=True)


def _normalize(pairs: Iterable[tuple[Fraction, Fraction]]) -> tuple[tuple[Fraction, Fraction], ...]:
    items = sorted((lo, hi) for lo, hi in pairs if lo < hi)
    out: list[list[Fraction]] = []
    for lo, hi in items:
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1][1] = hi
        else:
            out.append([lo, hi])
    return tuple((a, b) for a, b in out)


class IntervalSet:
    """Finite disjoint union of half-open rational intervals.

    Stored sorted, pairwise disjoint and with touching intervals merged,
    so two sets are equal exactly when their interval tuples are equal.
    """

    __slots__ = ("_iv", "_measure")

    def __init__(self, intervals: Iterable = (), *, _normalized: bool = False):
        if _normalized:
            self._iv = tuple(intervals)
        else:
            pairs = []
            for item in intervals:
                if isinstance(item, Interval):
                    pairs.append((item.lo, item.hi))
                else:
                    lo, hi = item
                    pairs.append((rat(lo), rat(hi)))
            self._iv = _normalize(pairs)
        self._measure = None

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls((), _normalized=True)

    @classmethod
    def of(cls, lo, hi) -> "IntervalSet":
        return cls([(lo, hi)])

    @property
    def pairs(self) -> tuple[tuple[Fraction, Fraction], ...]:
        return self._iv

    @property
    def intervals(self) -> list[Interval]:
        return [Interval(lo, hi) for lo, hi in self._iv]

    def __iter__(self) -> Iterator[tuple[Fraction, Fraction]]:
        return iter(self._iv)

    def __len__(self) -> int:
        return len(self._iv)

    def __bool__(self) -> bool:
        return bool(self._iv)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalSet) and self._iv == other._iv

    def __hash__(self) -> int:
        return hash(self._iv)

    def __repr__(self) -> str:
        body = " ∪ ".join(f"[{format_rat(a)},{format_rat(b)})" for a, b in self._iv)
        return f"IntervalSet({body or '∅'})"

    @property
    def measure(self) -> Fraction:
        if self._measure is None:
            self._measure = sum((hi - lo for lo, hi in self._iv), Fraction(0))
        return self._measure

    @property
    def lo(self) -> Fraction:
        return self._iv[0][0]

    @property
    def hi(self) -> Fraction:
        return self._iv[-1][1]

    def contains_point(self, x) -> bool:
        x = rat(x)
        i = bisect.bisect_right([lo for lo, _ in self._iv], x) - 1
        return i >= 0 and x < self._iv[i][1]

    def __contains__(self, x) -> bool:
        return self.contains_point(x)

    def normalized(self) -> "IntervalSet":
        return IntervalSet(self._iv)

    def __or__(self, other: "IntervalSet") -> "IntervalSet":
        return set_algebra(self, other, "union")

    def __and__(self, other: "IntervalSet") -> "IntervalSet":
        return set_algebra(self, other, "intersect")

    def __sub__(self, other: "IntervalSet") -> "IntervalSet":
        return set_algebra(self, other, "difference")

    def __xor__(self, other: "IntervalSet") -> "IntervalSet":
        return set_algebra(self, other, "symmetric_difference")

    def issubset(self, other: "IntervalSet") -> bool:
        return not (self - other)

    def isdisjoint(self, other: "IntervalSet") -> bool:
        return not (self & other)

    def shifted(self, offset) -> "IntervalSet":
        offset = rat(offset)
        return IntervalSet(tuple((a + offset, b + offset) for a, b in self._iv), _normalized=True)

    def denominators(self) -> set[int]:
        return {q.denominator for pair in self._iv for q in pair}


def measure(S: IntervalSet) -> Fraction:
    return S.measure


def union_all(sets: Iterable[IntervalSet]) -> IntervalSet:
    return IntervalSet(p for S in sets for p in S.pairs)


_OPS = {
    "union": lambda a, b: a or b,
    "intersect": lambda a, b: a and b,
    "difference": lambda a, b: a and not b,
    "symmetric_difference": lambda a, b: a != b,
}


def set_algebra(A: IntervalSet, B: IntervalSet, op: str) -> IntervalSet:
    """Boolean combination of two interval sets by an endpoint sweep."""
    try:
        keep = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown set operation {op!r}") from None
    if op == "union":
        return IntervalSet(A.pairs + B.pairs)
    events: list[tuple[Fraction, int, int]] = []
    for which, S in ((0, A), (1, B)):
        for lo, hi in S.pairs:
            events.append((lo, which, 1))
            events.append((hi, which, -1))
    events.sort()
    inside = [0, 0]
    out: list[tuple[Fraction, Fraction]] = []
    start = None
    i = 0
    n = len(events)
    while i < n:
        x = events[i][0]
        while i < n and events[i][0] == x:
            inside[events[i][1]] += events[i][2]
            i += 1
        on = keep(inside[0] > 0, inside[1] > 0)
        if on and start is None:
            start = x
        elif not on and start is not None:
            out.append((start, x))
            start = None
    return IntervalSet(out)


# ---------------------------------------------------------------------------
# piecewise-affine maps


@dataclass(frozen=True)
class Piece:
    lo: Fraction
    hi: Fraction
    slope: Fraction
    offset: Fraction

    def __call__(self, x: Fraction) -> Fraction:
        return self.slope * x + self.offset

    @property
    def image(self) -> tuple[Fraction, Fraction]:
        return (self.slope * self.lo + self.offset, self.slope * self.hi + self.offset)


def _merge_pieces(pieces: Sequence[Piece]) -> list[Piece]:
    out: list[Piece] = []
    for p in sorted(pieces, key=lambda p: p.lo):
        if out:
            q = out[-1]
            if q.hi == p.lo and q.slope == p.slope and q.offset == p.offset:
                out[-1] = Piece(q.lo, p.hi, q.slope, q.offset)
                continue
        out.append(p)
    return out


class PiecewiseAffineMap:
    """Invertible map made of affine pieces with positive rational slopes.

    ``pieces`` partition the domain; their images partition the range.
    Construction validates both and merges adjacent pieces that share a
    slope and offset, so equal maps have equal piece tuples.
    """

    __slots__ = ("pieces", "_los", "domain", "range", "cache")

    def __init__(self, pieces: Iterable, *, budget: PieceBudget | None = None, check: bool = True):
        raw = []
        for p in pieces:
            if not isinstance(p, Piece):
                lo, hi, slope, offset = p
                p = Piece(rat(lo), rat(hi), rat(slope), rat(offset))
            if not p.lo < p.hi:
                continue
            if p.slope <= 0:
                raise InvalidMap(f"non-positive slope {p.slope}")
            raw.append(p)
        merged = _merge_pieces(raw)
        (budget or DEFAULT_BUDGET).check(len(merged))
        self.pieces: tuple[Piece, ...] = tuple(merged)
        # memo for derived objects (inverse, integer-scaled views)
        self.cache: dict = {}
        self._los = [p.lo for p in self.pieces]
        for a, b in zip(self.pieces, self.pieces[1:]):
            if b.lo < a.hi:
                raise InvalidMap(f"overlapping sources at {b.lo}")
        self.domain = IntervalSet([(p.lo, p.hi) for p in self.pieces])
        images = [p.image for p in self.pieces]
        self.range = IntervalSet(images)
        if check and self.range.measure != sum((b - a for a, b in images), Fraction(0)):
            raise InvalidMap("piece images overlap; map is not injective")

    @classmethod
    def identity(cls, S: IntervalSet) -> "PiecewiseAffineMap":
        return cls([(lo, hi, 1, 0) for lo, hi in S.pairs])

    @classmethod
    def translation(cls, S: IntervalSet, offset) -> "PiecewiseAffineMap":
        return cls([(lo, hi, 1, offset) for lo, hi in S.pairs])

    def __len__(self) -> int:
        return len(self.pieces)

    def __eq__(self, other) -> bool:
        return isinstance(other, PiecewiseAffineMap) and self.pieces == other.pieces

    def __hash__(self) -> int:
        return hash(self.pieces)

    def __repr__(self) -> str:
        return f"PiecewiseAffineMap({len(self.pieces)} pieces on {self.domain!r})"

    def __call__(self, x) -> Fraction:
        return apply(self, x)

    @property
    def is_measure_preserving(self) -> bool:
        return all(p.slope == 1 for p in self.pieces)

    @property
    def slopes(self) -> set[Fraction]:
        return {p.slope for p in self.pieces}

    def piece_at(self, x) -> Piece:
        i = bisect.bisect_right(self._los, x) - 1
        if i >= 0:
            p = self.pieces[i]
            if p.lo <= x < p.hi:
                return p
        raise PointOutsideDomain(f"{format_rat(rat(x))} is outside the domain")

    def denominators(self) -> set[int]:
        out = set()
        for p in self.pieces:
            out.update((p.lo.denominator, p.hi.denominator, p.slope.denominator,
                        p.offset.denominator))
        return out

    def restrict(self, S: IntervalSet) -> "PiecewiseAffineMap":
        if not S.issubset(self.domain):
            raise SetOutsideDomain("restriction set is not inside the domain")
        return PiecewiseAffineMap(_split_by(self.pieces, S), check=False)

    def join(self, other: "PiecewiseAffineMap") -> "PiecewiseAffineMap":
        """Disjoint union of two maps with disjoint domains and ranges."""
        if not self.domain.isdisjoint(other.domain):
            raise DomainMismatch("domains overlap")
        return PiecewiseAffineMap(self.pieces + other.pieces)

    def scaled(self, factor) -> "PiecewiseAffineMap":
        """Conjugate by x -> factor * x; slopes are unchanged."""
        c = rat(factor)
        return PiecewiseAffineMap(
            [(c * p.lo, c * p.hi, p.slope, c * p.offset) for p in self.pieces])

    def to_lines(self) -> list[str]:
        return [" ".join(format_rat(v) for v in (p.lo, p.hi, p.slope, p.offset))
                for p in self.pieces]


def _split_by(pieces: Sequence[Piece], S: IntervalSet) -> list[Piece]:
    out = []
    los = [p.lo for p in pieces]
    for a, b in S.pairs:
        i = max(bisect.bisect_right(los, a) - 1, 0)
        while i < len(pieces) and pieces[i].lo < b:
            p = pieces[i]
            lo, hi = max(a, p.lo), min(b, p.hi)
            if lo < hi:
                out.append(Piece(lo, hi, p.slope, p.offset))
            i += 1
    return out


def apply(f: PiecewiseAffineMap, x) -> Fraction:
    x = rat(x)
    return f.piece_at(x)(x)


def invert(f: PiecewiseAffineMap) -> PiecewiseAffineMap:
    inv = f.cache.get("inverse")
    if inv is None:
        pieces = []
        for p in f.pieces:
            a, b = p.image
            pieces.append(Piece(a, b, 1 / p.slope, -p.offset / p.slope))
        inv = PiecewiseAffineMap(pieces, check=False)
        inv.cache["inverse"] = f
        f.cache["inverse"] = inv
    return inv


def compose(f: PiecewiseAffineMap, g: PiecewiseAffineMap, *,
            budget: PieceBudget | None = None) -> PiecewiseAffineMap:
    """Return ``f ∘ g`` on ``domain(g)``; requires ``range(g) ⊆ domain(f)``."""
    budget = budget or DEFAULT_BUDGET
    if not g.range.issubset(f.domain):
        raise DomainMismatch("range of inner map is not inside domain of outer map")
    fl = f._los
    out = []
    for q in g.pieces:
        a, b = q.image
        i = bisect.bisect_right(fl, a) - 1
        while i < len(f.pieces) and f.pieces[i].lo < b:
            p = f.pieces[i]
            lo, hi = max(a, p.lo), min(b, p.hi)
            if lo < hi:
                out.append(Piece((lo - q.offset) / q.slope, (hi - q.offset) / q.slope,
                                 p.slope * q.slope, p.slope * q.offset + p.offset))
            i += 1
        budget.check(len(out), "composite")
    return PiecewiseAffineMap(out, budget=budget, check=False)


def iterate(f: PiecewiseAffineMap, k: int, *, budget: PieceBudget | None = None) -> PiecewiseAffineMap:
    """``f`` composed ``|k|`` times (the inverse when ``k < 0``)."""
    if f.domain != f.range:
        raise DomainMismatch("iterate needs a self-map")
    if k == 0:
        return PiecewiseAffineMap.identity(f.domain)
    base = f if k > 0 else invert(f)
    k = abs(k)
    result = None
    power = base
    while True:
        if k & 1:
            result = power if result is None else compose(power, result, budget=budget)
        k >>= 1
        if not k:
            return result
        power = compose(power, power, budget=budget)


def image(f: PiecewiseAffineMap, S: IntervalSet) -> IntervalSet:
    if not S.issubset(f.domain):
        raise SetOutsideDomain("set is not inside the domain")
    return IntervalSet(p.image for p in _split_by(f.pieces, S))


def preimage(f: PiecewiseAffineMap, S: IntervalSet) -> IntervalSet:
    return image(invert(f), S)


def transport(src: IntervalSet, dst: IntervalSet) -> PiecewiseAffineMap:
    """Order-preserving map of constant slope carrying ``src`` onto ``dst``.

    Both sets are read left to right as one line of length ``measure``; the
    map is the uniform rescaling between those two lines.
    """
    ms, md = src.measure, dst.measure
    if not ms or not md:
        if ms or md:
            raise ValueError("cannot transport between a null and a non-null set")
        return PiecewiseAffineMap(())
    c = md / ms
    # cumulative measure breakpoints of both sets, on the source scale
    cuts = set()
    acc = Fraction(0)
    for a, b in src.pairs:
        cuts.add(acc)
        acc += b - a
    acc = Fraction(0)
    for a, b in dst.pairs:
        cuts.add(acc / c)
        acc += b - a
    cuts.add(ms)
    cuts = sorted(cuts)
    out = []
    si = di = 0
    s_acc = Fraction(0)  # cumulative source measure before interval si
    d_acc = Fraction(0)
    src_p, dst_p = src.pairs, dst.pairs
    for u, v in zip(cuts, cuts[1:]):
        while s_acc + (src_p[si][1] - src_p[si][0]) <= u:
            s_acc += src_p[si][1] - src_p[si][0]
            si += 1
        while d_acc + (dst_p[di][1] - dst_p[di][0]) <= u * c:
            d_acc += dst_p[di][1] - dst_p[di][0]
            di += 1
        x0 = src_p[si][0] + (u - s_acc)
        y0 = dst_p[di][0] + (u * c - d_acc)
        out.append((x0, x0 + (v - u), c, y0 - c * x0))
    return PiecewiseAffineMap(out, check=False)


def maps_equal_on(f: PiecewiseAffineMap, g: PiecewiseAffineMap, S: IntervalSet) -> bool:
    """True when ``f`` and ``g`` agree at every point of ``S``."""
    return f.restrict(S) == g.restrict(S)


def disagreement(f: PiecewiseAffineMap, g: PiecewiseAffineMap,
                 where: IntervalSet | None = None) -> IntervalSet:
    """Exact set of points of ``where`` at which ``f(x) != g(x)``.

    Points outside either domain count as disagreements.
    """
    where = where if where is not None else (f.domain | g.domain)
    common = f.domain & g.domain & where
    out = [(a, b) for a, b in (where - common).pairs]
    fp = _split_by(f.pieces, common)
    gl = [p.lo for p in g.pieces]
    for p in fp:
        i = bisect.bisect_right(gl, p.lo) - 1
        while i < len(g.pieces) and g.pieces[i].lo < p.hi:
            q = g.pieces[i]
            lo, hi = max(p.lo, q.lo), min(p.hi, q.hi)
            if lo < hi:
                if p.slope == q.slope:
                    if p.offset != q.offset:
                        out.append((lo, hi))
                else:
                    # affine functions cross at one point at most
                    out.append((lo, hi))
            i += 1
    return IntervalSet(out)


def to_set_lines(S: IntervalSet) -> list[str]:
    return [f"{format_rat(a)} {format_rat(b)}" for a, b in S.pairs]


def parse_set_lines(lines: Iterable[str]) -> IntervalSet:
    pairs = []
    for line in lines:
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"bad interval line {line!r}")
        pairs.append((parse_rat(parts[0]), parse_rat(parts[1])))
    return IntervalSet(pairs)


def parse_map_lines(lines: Iterable[str]) -> PiecewiseAffineMap:
    pieces = []
    for line in lines:
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"bad map line {line!r}")
        pieces.append(tuple(parse_rat(p) for p in parts))
    return PiecewiseAffineMap(pieces)


def common_denominator(*things) -> int:
    """lcm of every denominator appearing in the given sets and maps."""
    L = 1
    for t in things:
        for d in t.denominators():
            L = lcm(L, d)
    return L
