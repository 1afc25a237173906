"""Backend selection and the integer-scaled view of slope-1 systems.

The compiled extension ``towerplex._kernels`` is used when it imports and
the scaled numbers fit in int64; otherwise the pure-Python twin runs.  Set
``TOWERPLEX_PURE=1`` to force the fallback.
"""
from __future__ import annotations

import os
from fractions import Fraction
from typing import Iterable

from . import _kernels_py
from .exact import IntervalSet, PiecewiseAffineMap, lcm

try:
    if os.environ.get("TOWERPLEX_PURE"):
        raise ImportError("pure backend forced")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"

# headroom for sums of a few endpoints
_INT64_SAFE = 1 << 60


class NotMeasurePreserving(ValueError):
    code = "NOT_SLOPE_ONE"


class ScaledMap:
    """A slope-1 map and a common denominator ``L`` for integer kernels.

    ``L`` covers the map and any sets registered up front; sets with other
    denominators must be converted through :meth:`scaled_set` only if they
    are compatible, otherwise a larger denominator is needed.
    """

    def __init__(self, f: PiecewiseAffineMap, sets: Iterable[IntervalSet] = (),
                 backend: str | None = None):
        if not f.is_measure_preserving:
            raise NotMeasurePreserving("integer kernels need a slope-1 map")
        L = 1
        for d in f.denominators():
            L = lcm(L, d)
        self.map = f
        self.requested = backend
        self.L = 0
        self._rescale(L)
        for S in sets:
            self.ensure(S)

    def _rescale(self, L: int) -> None:
        f = self.map
        self.L = L
        self.lo = [self._num(p.lo) for p in f.pieces]
        self.hi = [self._num(p.hi) for p in f.pieces]
        self.off = [self._num(p.offset) for p in f.pieces]
        top = max([abs(v) for v in self.hi + self.off] + [1])
        fits = 4 * top < _INT64_SAFE
        backend = self.requested
        if backend is None:
            backend = BACKEND if fits else "python"
        if backend == "cython" and (_compiled is None or not fits):
            raise RuntimeError("compiled backend unavailable for this input")
        self.backend = backend
        self.k = _compiled if backend == "cython" else _kernels_py

    def ensure(self, S: IntervalSet) -> None:
        """Refine the common denominator so ``S`` sits on the grid."""
        L = self.L
        for d in S.denominators():
            if L % d:
                L = lcm(L, d)
        if L != self.L:
            self._rescale(L)

    def _num(self, q: Fraction) -> int:
        n = q * self.L
        if n.denominator != 1:
            raise ValueError(f"{q} is not on the 1/{self.L} grid")
        return n.numerator

    def scaled_set(self, S: IntervalSet) -> list[int]:
        self.ensure(S)
        return [self._num(v) for pair in S.pairs for v in pair]

    def unscale(self, s: list[int]) -> IntervalSet:
        L = self.L
        return IntervalSet(((Fraction(s[k], L), Fraction(s[k + 1], L))
                            for k in range(0, len(s), 2)), _normalized=True)

    def measure(self, n: int) -> Fraction:
        return Fraction(n, self.L)

    # thin wrappers returning exact Fractions

    def image(self, S: IntervalSet) -> IntervalSet:
        return self.unscale(list(self.k.image(self.lo, self.hi, self.off, self.scaled_set(S))))

    def correlations(self, A: IntervalSet, B: IntervalSet, n: int) -> list[Fraction]:
        raw = self.k.correlation_series(self.lo, self.hi, self.off,
                                        self.scaled_set(A), self.scaled_set(B), n)
        return [Fraction(v, self.L) for v in raw]

    def symdiffs(self, A: IntervalSet, times: list[int]) -> list[Fraction]:
        order = sorted(set(times))
        raw = self.k.symdiff_at(self.lo, self.hi, self.off, self.scaled_set(A), order)
        found = dict(zip(order, raw))
        return [Fraction(found[t], self.L) for t in times]

    def sweep(self, F: IntervalSet, n: int) -> list[Fraction]:
        raw = self.k.sweep_series(self.lo, self.hi, self.off, self.scaled_set(F), n)
        return [Fraction(v, self.L) for v in raw]

    def stable(self, A: IntervalSet, bad: IntervalSet, m: int) -> Fraction:
        v = self.k.stable_measure(self.lo, self.hi, self.off,
                                  self.scaled_set(A), self.scaled_set(bad), m)
        return Fraction(v, self.L)


def scaled(f: PiecewiseAffineMap, *sets: IntervalSet, backend: str | None = None) -> ScaledMap:
    """Integer view of ``f``, memoized on the map per backend choice."""
    key = ("scaled", backend)
    sm = f.cache.get(key)
    if sm is None:
        sm = f.cache[key] = ScaledMap(f, (), backend=backend)
    for S in sets:
        sm.ensure(S)
    return sm
