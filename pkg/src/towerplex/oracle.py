"""Brute-force grid oracle.

Discretizes the span of a slope-1 map into cells of width ``1/L`` where
``L`` is a common multiple of every denominator in play, turns the map
into a permutation of cells and sets into boolean masks, and measures by
counting.  It shares no code with the interval kernels.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import IntervalSet, PiecewiseAffineMap, common_denominator


class GridTooFine(ValueError):
    pass


class Grid:
    def __init__(self, T: PiecewiseAffineMap, *sets: IntervalSet, max_cells: int = 10_000_000,
                 L: int | None = None):
        if not T.is_measure_preserving:
            raise ValueError("grid oracle needs a slope-1 map")
        self.L = L or common_denominator(T, *sets)
        lo, hi = T.domain.lo, T.domain.hi
        for S in sets:
            if S:
                lo, hi = min(lo, S.lo), max(hi, S.hi)
        self.origin = lo
        size = (hi - lo) * self.L
        if size.denominator != 1:
            raise GridTooFine("span is not a whole number of cells")
        self.size = int(size)
        if self.size > max_cells:
            raise GridTooFine(f"{self.size} cells exceeds cap {max_cells}")
        # cells outside the domain stay fixed
        perm = np.arange(self.size, dtype=np.int64)
        for p in T.pieces:
            a, b = self._cell(p.lo), self._cell(p.hi)
            shift = p.offset * self.L
            if shift.denominator != 1:
                raise GridTooFine("offset is not a whole number of cells")
            perm[a:b] = np.arange(a, b, dtype=np.int64) + int(shift)
        if len(np.unique(perm)) != self.size:
            raise ValueError("map is not a permutation of grid cells")
        self.perm = perm

    def _cell(self, x: Fraction) -> int:
        v = (x - self.origin) * self.L
        if v.denominator != 1:
            raise GridTooFine(f"{x} is not on the grid")
        return int(v)

    def mask(self, S: IntervalSet) -> np.ndarray:
        m = np.zeros(self.size, dtype=bool)
        for a, b in S.pairs:
            m[self._cell(a):self._cell(b)] = True
        return m

    def measure(self, m: np.ndarray) -> Fraction:
        return Fraction(int(m.sum()), self.L)

    def push(self, m: np.ndarray) -> np.ndarray:
        out = np.zeros_like(m)
        out[self.perm[m]] = True
        return out

    def pull(self, m: np.ndarray) -> np.ndarray:
        return m[self.perm]

    def orbit(self, S: IntervalSet, n: int, power: int = 1):
        """Masks of ``T^{power*i} S`` for ``i < n``."""
        m = self.mask(S)
        step = self.push if power > 0 else self.pull
        for i in range(n):
            yield m
            for _ in range(abs(power)):
                m = step(m)

    def correlations(self, A: IntervalSet, B: IntervalSet, n: int, power: int = 1) -> list[Fraction]:
        ma = self.mask(A)
        return [self.measure(ma & mb) for mb in self.orbit(B, n, power)]

    def symdiff(self, A: IntervalSet, t: int) -> Fraction:
        ma = self.mask(A)
        m = ma
        for _ in range(t):
            m = self.push(m)
        return self.measure(m ^ ma)

    def sweep(self, F: IntervalSet, n: int) -> list[Fraction]:
        total = Fraction(self.size, self.L)
        covered = np.zeros(self.size, dtype=bool)
        out = []
        for m in self.orbit(F, n + 1):
            covered |= m
            out.append(total - self.measure(covered))
        return out


def product_correlations(grid: Grid, exponents: Sequence[int], A_boxes, B_boxes,
                         n: int) -> list[Fraction]:
    """Count cells of the full product grid (small grids only)."""
    masks_a = [grid.mask(A) for A in A_boxes]
    orbits = [list(grid.orbit(B, n, u)) for u, B in zip(exponents, B_boxes)]
    out = []
    cell = Fraction(1, grid.L) ** len(exponents)
    for i in range(n):
        full = None
        for ma, orb in zip(masks_a, orbits):
            factor = ma & orb[i]
            full = factor if full is None else np.multiply.outer(full, factor)
        out.append(int(full.sum()) * cell)
    return out
