"""Rank-one starters by cutting and stacking, their Rokhlin towers, and
rigidity-sequence helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .exact import (ExactError, Interval, IntervalSet, PieceBudget, PiecewiseAffineMap,
                    DEFAULT_BUDGET, rat, union_all)


class SpecExhausted(ExactError):
    code = "SPEC_EXHAUSTED"


class ResidualTooLarge(ExactError):
    code = "RESIDUAL_TOO_LARGE"


@dataclass(frozen=True)
class RankOneSpec:
    """Cut counts ``cuts[m]`` and per-subcolumn spacer counts ``spacers[m]``."""

    cuts: tuple[int, ...]
    spacers: tuple[tuple[int, ...], ...]
    initial_base: Interval = Interval(0, 1)
    name: str = "custom"

    def __post_init__(self):
        if len(self.cuts) != len(self.spacers):
            raise ValueError("cuts and spacers must have one entry per stage")
        for r, s in zip(self.cuts, self.spacers):
            if r < 2:
                raise ValueError("every stage must cut into at least 2 subcolumns")
            if len(s) != r or any(c < 0 for c in s):
                raise ValueError("each stage needs one non-negative spacer count per subcolumn")

    @classmethod
    def odometer(cls, depth: int, base: Interval = Interval(0, 1)) -> "RankOneSpec":
        return cls((2,) * depth, ((0, 0),) * depth, base, "odometer")

    @classmethod
    def chacon(cls, depth: int, base: Interval = Interval(0, 1)) -> "RankOneSpec":
        return cls((3,) * depth, ((0, 1, 0),) * depth, base, "chacon")

    @classmethod
    def custom(cls, cuts: Sequence[int], spacers: Sequence[Sequence[int]],
               base: Interval = Interval(0, 1)) -> "RankOneSpec":
        return cls(tuple(cuts), tuple(tuple(s) for s in spacers), base, "custom")

    def __len__(self) -> int:
        return len(self.cuts)


@dataclass(frozen=True)
class RankOneSystem:
    """Stage-``m`` cutting-and-stacking map and the columns of every stage.

    ``columns[j]`` lists the levels (bottom to top) of the stage-``j``
    column; each level is a single interval.  ``map`` sends every level of
    the last column to the one above it and the top level back to the base.
    """

    spec: RankOneSpec
    stage: int
    map: PiecewiseAffineMap
    columns: tuple[tuple[Interval, ...], ...]
    space: IntervalSet

    @property
    def tower_base(self) -> Interval:
        return self.columns[self.stage][0]

    @property
    def tower_height(self) -> int:
        return len(self.columns[self.stage])

    def heights(self) -> list[int]:
        return [len(c) for c in self.columns]

    def scaled(self, factor) -> "RankOneSystem":
        """Conjugate copy under ``x -> factor * x`` (still measure preserving)."""
        c = rat(factor)
        cols = tuple(tuple(Interval(c * iv.lo, c * iv.hi) for iv in col) for col in self.columns)
        space = IntervalSet((c * a, c * b) for a, b in self.space.pairs)
        return RankOneSystem(self.spec, self.stage, self.map.scaled(c), cols, space)

    def normalized(self) -> "RankOneSystem":
        """Rescaled copy whose space is ``[0, 1)`` when it starts at 0."""
        return self.scaled(1 / self.space.measure)

    def levels(self, stage: int) -> list[IntervalSet]:
        return [iv.as_set() for iv in self.columns[stage]]


def _column_map(column: Sequence[Interval]) -> list[tuple]:
    pieces = []
    for k, iv in enumerate(column):
        nxt = column[(k + 1) % len(column)]
        pieces.append((iv.lo, iv.hi, 1, nxt.lo - iv.lo))
    return pieces


def build_rank_one(spec: RankOneSpec, m: int, *, budget: PieceBudget | None = None) -> RankOneSystem:
    """Cut and stack ``m`` times starting from ``spec.initial_base``."""
    budget = budget or DEFAULT_BUDGET
    if m < 0 or m > len(spec):
        raise SpecExhausted(f"spec has {len(spec)} stages, asked for {m}")
    column = [spec.initial_base]
    columns = [tuple(column)]
    right = spec.initial_base.hi
    for stage in range(m):
        r = spec.cuts[stage]
        w = column[0].length / r
        new: list[Interval] = []
        for j in range(r):
            new.extend(Interval(iv.lo + j * w, iv.lo + (j + 1) * w) for iv in column)
            for _ in range(spec.spacers[stage][j]):
                new.append(Interval(right, right + w))
                right += w
        budget.check(len(new), "rank-one column")
        column = new
        columns.append(tuple(column))
    f = PiecewiseAffineMap(_column_map(column), budget=budget)
    space = IntervalSet((iv.lo, iv.hi) for iv in column)
    return RankOneSystem(spec, m, f, tuple(columns), space)


def rokhlin_tower(sys: RankOneSystem, h: int, eps) -> tuple[IntervalSet, IntervalSet]:
    """Base of an ``h``-level tower for ``sys.map`` and the residual set.

    Uses the shallowest native column of height at least ``h`` whose
    full groups of ``h`` consecutive levels leave a residual of measure
    below ``eps``.
    """
    eps = rat(eps)
    if h < 1:
        raise ValueError("tower height must be positive")
    best = None
    for col in sys.columns:
        H = len(col)
        if H < h:
            continue
        groups = H // h
        base = IntervalSet((col[g * h].lo, col[g * h].hi) for g in range(groups))
        used = IntervalSet((iv.lo, iv.hi) for iv in col[: groups * h])
        residual = sys.space - used
        if residual.measure < eps:
            return base, residual
        if best is None or residual.measure < best:
            best = residual.measure
    raise ResidualTooLarge(
        f"no column of height >= {h} leaves residual < {eps} (best {best}); build deeper")


def tower_levels(f: PiecewiseAffineMap, base: IntervalSet, h: int) -> list[IntervalSet]:
    from .exact import image

    levels = [base]
    for _ in range(h - 1):
        levels.append(image(f, levels[-1]))
    return levels


# rigidity sequences

@dataclass(frozen=True)
class RigiditySequence:
    terms: tuple[int, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("rigidity sequence must be nonempty")
        if any(b <= a for a, b in zip(self.terms, self.terms[1:])):
            raise ValueError("rigidity sequence must be strictly increasing")
        if self.terms[0] < 1:
            raise ValueError("terms must be natural numbers")

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)

    def largest_at_most(self, bound: int) -> int | None:
        below = [t for t in self.terms if t <= bound]
        return below[-1] if below else None


def convergent_denominators(cf: Sequence[int], count: int) -> RigiditySequence:
    """Denominators q_1..q_count of the convergents of ``[0; a_1, a_2, ...]``."""
    if not cf:
        raise ValueError("continued fraction must be nonempty")
    q_prev, q = 0, 1
    out = []
    for a in list(cf)[:count]:
        q_prev, q = q, a * q + q_prev
        out.append(q)
    return RigiditySequence(tuple(out))


def powers_of_two(start: int, stop: int) -> RigiditySequence:
    return RigiditySequence(tuple(2 ** m for m in range(start, stop + 1)))


def density(A: RigiditySequence, k: int) -> Fraction:
    if k < 1:
        raise ValueError("k must be at least 1")
    return Fraction(sum(1 for t in A.terms if t <= k), k)
