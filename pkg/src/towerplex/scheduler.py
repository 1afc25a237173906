"""Parameter scheduling: M_n by exact search, then eps_n and h_n as powers
of two satisfying the summability inequalities."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .exact import ExactError, IntervalSet, PiecewiseAffineMap, rat
from .rankone import RigiditySequence
from .stats import ProductSpec, rigidity_deviations, signed_correlations


class UniverseExhausted(ExactError):
    code = "UNIVERSE_EXHAUSTED"


class SearchCapExceeded(ExactError):
    code = "SEARCH_CAP"

    def __init__(self, msg: str, best: Fraction | None = None, at: int | None = None):
        super().__init__(msg)
        self.best = best
        self.at = at


def _entry_key(e: int) -> tuple[int, int]:
    return (abs(e), e > 0)


def enumerate_vectors(count: int, max_len: int = 3, max_abs: int = 3) -> list[tuple[int, ...]]:
    """First ``count`` nonzero-integer vectors ordered by length, then
    largest entry, then entrywise with ``-k`` before ``+k``."""
    if count < 1:
        raise ValueError("count must be positive")
    out: list[tuple[int, ...]] = []
    entries = sorted((e for k in range(1, max_abs + 1) for e in (-k, k)), key=_entry_key)
    for length in range(1, max_len + 1):
        for top in range(1, max_abs + 1):
            allowed = [e for e in entries if abs(e) <= top]
            block = [v for v in itertools.product(allowed, repeat=length)
                     if max(abs(e) for e in v) == top]
            block.sort(key=lambda v: [_entry_key(e) for e in v])
            for v in block:
                out.append(v)
                if len(out) == count:
                    return out
    raise UniverseExhausted(f"only {len(out)} vectors with length <= {max_len}, |entry| <= {max_abs}")


def _largest_pow2_below(x: Fraction) -> Fraction:
    """Largest 2^k (k any integer) strictly below positive ``x``."""
    p = Fraction(1)
    while p >= x:
        p /= 2
    while p * 2 < x:
        p *= 2
    return p


def _smallest_pow2_above(x: Fraction) -> int:
    p = 1
    while p <= x:
        p *= 2
    return p


def choose_eps_h(M: int, n: int, eps_prev) -> tuple[Fraction, int]:
    eps_prev = rat(eps_prev)
    if M < 1 or n < 1 or eps_prev <= 0:
        raise ValueError("need M, n >= 1 and eps_prev > 0")
    eps = _largest_pow2_below(eps_prev / (n * M))
    h = _smallest_pow2_above(max(Fraction(n * M) / eps_prev, Fraction(M)))
    return eps, max(h, 2)


def _condition_sums(R: PiecewiseAffineMap, A: IntervalSet, v: Sequence[int], cap: int,
                    muXn: Fraction) -> list[Fraction]:
    """Scaled sums at every N in 1..cap for the box A×…×A under R^{v}."""
    ell = len(v)
    mu_space = muXn ** ell
    mA = A.measure ** ell
    target = mA * mA / mu_space
    prod = [Fraction(1)] * cap
    for u in v:
        prod = [x * y for x, y in zip(prod, signed_correlations(R, A, A, u, cap))]
    sums = []
    acc = Fraction(0)
    for N, c in enumerate(prod, start=1):
        acc += abs(c - target)
        sums.append(mu_space ** 2 * acc / N)
    return sums


@dataclass
class MChoice:
    M: int
    worst: Fraction          # largest condition value at N = M over cells and vectors
    vectors: list
    rigidity: Fraction | None = None


def choose_M(R: PiecewiseAffineMap, cells: Sequence[IntervalSet], muXn, delta, *,
             floor: int = 0, vectors: Sequence[Sequence[int]] = ((1,),), search_cap: int = 512,
             rho: RigiditySequence | None = None) -> MChoice:
    """Smallest ``M > floor`` at which every cell passes every vector's
    scaled-sum condition at ``N = M`` (and, with ``rho``, the rigidity
    predicate at the largest ``ρ <= M``)."""
    delta, muXn = rat(delta), rat(muXn)
    if delta <= 0:
        raise ValueError("delta must be positive")
    cells = [c for c in cells if c]
    vectors = [tuple(v) for v in vectors]
    if floor + 1 > search_cap:
        raise SearchCapExceeded(f"floor {floor} already reaches cap {search_cap}")
    rig = {}
    if rho is not None:
        times = [t for t in rho.terms if t <= search_cap]
        for A in cells:
            rig[A] = dict(zip(times, rigidity_deviations(R, A, times)))
    best, best_at = None, None
    # search in doubling windows so small M never pays for the full cap
    lo_M = floor + 1
    window = min(search_cap, max(16, 2 * lo_M))
    while True:
        table = [_condition_sums(R, A, v, window, muXn) for A in cells for v in vectors]
        for M in range(lo_M, window + 1):
            worst = max((row[M - 1] for row in table), default=Fraction(0))
            r_worst = None
            ok = worst < delta
            if rho is not None:
                t = rho.largest_at_most(M)
                r_worst = max((rig[A][t] for A in cells), default=Fraction(0)) if t else None
                ok = ok and r_worst is not None and r_worst < delta
            if ok:
                return MChoice(M, worst, vectors, r_worst)
            if best is None or worst < best:
                best, best_at = worst, M
        if window >= search_cap:
            break
        lo_M, window = window + 1, min(search_cap, 2 * window)
    raise SearchCapExceeded(f"no M <= {search_cap} satisfies delta = {delta}; best {best} at {best_at}",
                            best, best_at)


@dataclass
class ScheduleParams:
    delta: list = field(default_factory=list)
    M: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    h: list = field(default_factory=list)
    j: list = field(default_factory=list)
    rho: RigiditySequence | None = None
    vector_budget: int = 4

    def violations(self, eps0=1) -> list[str]:
        """Every failed inequality, as text; empty when the schedule is valid."""
        bad = []
        eps_prev, h_prev, M_prev = rat(eps0), 0, 0
        for i, (M, eps, h) in enumerate(zip(self.M, self.eps, self.h), start=1):
            if not M > max(h_prev, M_prev):
                bad.append(f"M_{i} = {M} not above max(h, M) = {max(h_prev, M_prev)}")
            if not eps * i * M < eps_prev:
                bad.append(f"eps_{i} * {i} * M_{i} >= eps_{i - 1}")
            if not Fraction(i * M, h) < eps_prev:
                bad.append(f"{i} * M_{i} / h_{i} >= eps_{i - 1}")
            if not h > M:
                bad.append(f"h_{i} = {h} not above M_{i} = {M}")
            eps_prev, h_prev, M_prev = eps, h, M
        return bad


def default_delta(n: int) -> Fraction:
    return Fraction(1, 2 ** n)


def default_j(n: int, vector_budget: int) -> int:
    return min(n, vector_budget)


class Scheduler:
    """Chooses ``(h_n, eps_n)`` for each new stage and records the schedule."""

    def __init__(self, *, eps0=1, search_cap: int = 512, vector_budget: int = 4,
                 check_rigidity: bool = False, rho: RigiditySequence | None = None,
                 delta: Sequence | None = None, max_len: int = 3, max_abs: int = 3):
        self.eps0 = rat(eps0)
        self.search_cap = search_cap
        self.vector_budget = vector_budget
        self.check_rigidity = check_rigidity
        self.max_len, self.max_abs = max_len, max_abs
        self.delta_override = [rat(d) for d in delta] if delta else None
        self.params = ScheduleParams(rho=rho, vector_budget=vector_budget)
        self.choices: list[MChoice] = []

    def delta(self, n: int) -> Fraction:
        if self.delta_override and n <= len(self.delta_override):
            return self.delta_override[n - 1]
        return default_delta(n)

    def vectors(self, n: int) -> list[tuple[int, ...]]:
        j = default_j(n, self.vector_budget)
        vs = [(1,)]
        for v in enumerate_vectors(j, self.max_len, self.max_abs):
            if v not in vs:
                vs.append(v)
        return vs

    def choose(self, n: int, R: PiecewiseAffineMap, cells: Sequence[IntervalSet], muXn) -> tuple[int, Fraction]:
        p = self.params
        floor = max(p.h[-1] if p.h else 0, p.M[-1] if p.M else 0)
        delta = self.delta(n)
        choice = choose_M(R, cells, muXn, delta, floor=floor, vectors=self.vectors(n),
                          search_cap=self.search_cap,
                          rho=p.rho if self.check_rigidity else None)
        eps_prev = p.eps[-1] if p.eps else self.eps0
        eps, h = choose_eps_h(choice.M, n, eps_prev)
        p.delta.append(delta)
        p.M.append(choice.M)
        p.eps.append(eps)
        p.h.append(h)
        p.j.append(default_j(n, self.vector_budget))
        self.choices.append(choice)
        return h, eps
