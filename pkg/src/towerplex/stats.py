"""Exact correlation diagnostics: weight sequences, rational weak mixing
sums, scaled sums, rigidity deviations, product systems and sweep-out."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .exact import (ExactError, IntervalSet, PiecewiseAffineMap, image, invert, rat, union_all)
from .kernels import ScaledMap, scaled


class ZeroNormalizer(ExactError):
    code = "ZERO_NORMALIZER"


@dataclass(frozen=True)
class DiagnosticsReport:
    """Every term of a normalized sum, its prefix sums, and the normalizer."""

    name: str
    terms: tuple
    partial_sums: tuple
    normalizer: Fraction
    value: Fraction
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_terms(cls, name: str, terms: Sequence[Fraction], normalizer: Fraction, **meta):
        partial = []
        acc = Fraction(0)
        for t in terms:
            acc += t
            partial.append(acc)
        return cls(name, tuple(terms), tuple(partial), rat(normalizer), acc * normalizer, meta)


@dataclass(frozen=True)
class WeightSequence:
    F: IntervalSet
    u: tuple
    a: tuple    # a[N] = sum of u[k] for k < N, with a[0] = 0


class _Exact:
    """Fallback correlation engine for maps with non-unit slopes."""

    def __init__(self, T: PiecewiseAffineMap):
        self.T = T

    def correlations(self, A, B, n):
        out = []
        cur = B
        for k in range(n):
            if k:
                cur = image(self.T, cur)
            out.append((A & cur).measure)
        return out

    def symdiffs(self, A, times):
        order = sorted(set(times))
        found = {}
        cur, t = A, 0
        for target in order:
            while t < target:
                cur = image(self.T, cur)
                t += 1
            found[target] = (cur ^ A).measure
        return [found[t] for t in times]

    def sweep(self, F, n):
        covered = cur = F
        out = [F.measure]
        for _ in range(n):
            cur = image(self.T, cur)
            covered = covered | cur
            out.append(covered.measure)
        return out


def engine(T: PiecewiseAffineMap, *sets: IntervalSet, backend: str | None = None):
    if T.is_measure_preserving:
        return scaled(T, *sets, backend=backend)
    return _Exact(T)


def correlations(T: PiecewiseAffineMap, A: IntervalSet, B: IntervalSet, n: int,
                 backend: str | None = None) -> list[Fraction]:
    """``[μ(A ∩ T^k B) for k < n]``."""
    if not A or not B or n <= 0:
        return [Fraction(0)] * max(n, 0)
    return engine(T, A, B, backend=backend).correlations(A, B, n)


def signed_correlations(T: PiecewiseAffineMap, A: IntervalSet, B: IntervalSet, power: int,
                        n: int, backend: str | None = None) -> list[Fraction]:
    """``[μ(A ∩ T^{power*i} B) for i < n]`` without composing ``T``."""
    if power == 0:
        return [(A & B).measure] * n
    if power < 0 and A == B:
        # μ(A ∩ T^{-t} A) = μ(T^t A ∩ A) for an invertible measure-preserving T
        power = -power
    base = T if power > 0 else invert(T)
    step = abs(power)
    series = correlations(base, A, B, step * (n - 1) + 1, backend=backend)
    return series[::step][:n]


def weight_sequence(T: PiecewiseAffineMap, F: IntervalSet, K: int) -> WeightSequence:
    if K < 1:
        raise ValueError("K must be at least 1")
    muF = F.measure
    if not muF:
        raise ZeroNormalizer("F has measure zero")
    u = tuple(c / muF ** 2 for c in correlations(T, F, F, K))
    a = [Fraction(0)]
    for v in u:
        a.append(a[-1] + v)
    return WeightSequence(F, u, tuple(a))


def rwm_report(T: PiecewiseAffineMap, F: IntervalSet, A: IntervalSet, B: IntervalSet,
               N: int) -> DiagnosticsReport:
    """``(1/a_N) Σ_{k<N} |μ(A ∩ T^k B) - μ(A) μ(B) u_k(F)|``."""
    w = weight_sequence(T, F, N)
    aN = w.a[N]
    if not aN:
        raise ZeroNormalizer("a_N is zero")
    mA, mB = A.measure, B.measure
    corr = correlations(T, A, B, N)
    terms = [abs(c - mA * mB * uk) for c, uk in zip(corr, w.u)]
    return DiagnosticsReport.from_terms("rwm", terms, 1 / aN, N=N)


def rwm_sum(T, F, A, B, N) -> Fraction:
    return rwm_report(T, F, A, B, N).value


def scaled_rwm_report(T: PiecewiseAffineMap, A: IntervalSet, N: int, muXn) -> DiagnosticsReport:
    """``(μX²/N) Σ_{i<N} |μ(A ∩ T^i A) - μ(A)²/μX|``."""
    muXn = rat(muXn)
    if N < 1 or muXn <= 0:
        raise ValueError("need N >= 1 and muXn > 0")
    mA = A.measure
    corr = correlations(T, A, A, N)
    terms = [abs(c - mA * mA / muXn) for c in corr]
    return DiagnosticsReport.from_terms("scaled_rwm", terms, muXn ** 2 / N, N=N, muXn=muXn)


def scaled_rwm_sum(T, A, N, muXn) -> Fraction:
    return scaled_rwm_report(T, A, N, muXn).value


def mixed_scaled_report(T: PiecewiseAffineMap, E: IntervalSet, A: IntervalSet, N: int,
                        muXn) -> DiagnosticsReport:
    """``(μX/N) Σ_{i<N} |μ(E ∩ T^i A) - μ(E)μ(A)/μX|``."""
    muXn = rat(muXn)
    if N < 1 or muXn <= 0:
        raise ValueError("need N >= 1 and muXn > 0")
    mE, mA = E.measure, A.measure
    corr = correlations(T, E, A, N)
    terms = [abs(c - mE * mA / muXn) for c in corr]
    return DiagnosticsReport.from_terms("mixed_scaled", terms, muXn / N, N=N, muXn=muXn)


def mixed_scaled_sum(T, E, A, N, muXn) -> Fraction:
    return mixed_scaled_report(T, E, A, N, muXn).value


def rigidity_deviations(T: PiecewiseAffineMap, A: IntervalSet, rhos: Sequence[int],
                        backend: str | None = None) -> list[Fraction]:
    """``μ(T^ρ A △ A)`` for every ρ, sharing one forward orbit of ``A``."""
    if not A:
        return [Fraction(0)] * len(rhos)
    if any(r < 0 for r in rhos):
        raise ValueError("rigidity times must be non-negative")
    return engine(T, A, backend=backend).symdiffs(A, list(rhos))


def rigidity_deviation(T: PiecewiseAffineMap, A: IntervalSet, rho: int) -> Fraction:
    return rigidity_deviations(T, A, [rho])[0]


# -- product systems ------------------------------------------------------------


@dataclass(frozen=True)
class ProductSpec:
    exponents: tuple

    def __post_init__(self):
        if not 1 <= len(self.exponents) <= 3:
            raise ValueError("product length must be between 1 and 3")
        if any(u == 0 for u in self.exponents):
            raise ValueError("exponents must be nonzero")

    def __len__(self):
        return len(self.exponents)


def _boxes(spec: ProductSpec, boxes) -> list[IntervalSet]:
    if isinstance(boxes, IntervalSet):
        return [boxes] * len(spec)
    boxes = list(boxes)
    if len(boxes) != len(spec):
        raise ValueError("one factor set per exponent is required")
    return boxes


def product_correlations(spec: ProductSpec, T: PiecewiseAffineMap, A_boxes, B_boxes,
                         n: int) -> list[Fraction]:
    """``[μ⊗(A ∩ (T^{u_1}×…×T^{u_ℓ})^i B) for i < n]`` on boxes."""
    A, B = _boxes(spec, A_boxes), _boxes(spec, B_boxes)
    out = [Fraction(1)] * n
    cache: dict = {}
    for u, Aj, Bj in zip(spec.exponents, A, B):
        key = (u, Aj, Bj)
        if key not in cache:
            cache[key] = signed_correlations(T, Aj, Bj, u, n)
        out = [x * y for x, y in zip(out, cache[key])]
    return out


def product_correlation(spec: ProductSpec, T, A_boxes, B_boxes, i: int) -> Fraction:
    return product_correlations(spec, T, A_boxes, B_boxes, i + 1)[i]


def product_scaled_report(spec: ProductSpec, T: PiecewiseAffineMap, A_boxes, N: int,
                          muXn) -> DiagnosticsReport:
    """The scaled sum with ``T^{u_1}×…×T^{u_ℓ}`` in place of ``T``.

    ``muXn`` is the measure of the ambient (product) space.
    """
    muXn = rat(muXn)
    A = _boxes(spec, A_boxes)
    mA = Fraction(1)
    for Aj in A:
        mA *= Aj.measure
    corr = product_correlations(spec, T, A, A, N)
    terms = [abs(c - mA * mA / muXn) for c in corr]
    return DiagnosticsReport.from_terms("product_scaled", terms, muXn ** 2 / N,
                                        N=N, muXn=muXn, exponents=spec.exponents)


def product_scaled_sum(spec, T, A_boxes, N, muXn) -> Fraction:
    return product_scaled_report(spec, T, A_boxes, N, muXn).value


# -- sweep-out ------------------------------------------------------------------------


def sweep_series(T: PiecewiseAffineMap, F: IntervalSet, N: int) -> list[Fraction]:
    """Unswept measure ``μ(dom T ∖ ∪_{i≤K} T^i F)`` for ``K = 0..N``."""
    total = T.domain.measure
    if not F:
        return [total] * (N + 1)
    return [total - c for c in engine(T, F).sweep(F, N)]


def sweep_out(T: PiecewiseAffineMap, F: IntervalSet, N: int) -> Fraction:
    return sweep_series(T, F, N)[-1]
