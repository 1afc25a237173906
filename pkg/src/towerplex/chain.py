"""The multiplexing chain: cycles S_n grafted onto Rokhlin towers of R_n.

Stage ``n`` holds a slope-1 map ``R_n`` on ``X_n`` and an ``h_n``-cycle
``S_n`` on ``Y_n``.  Multiplexing picks a tower for ``R_n``, moves part of
the cycle into it, and conjugates by the contraction ``tau_n`` so that
``R_{n+1} = tau_n^{-1} R_n tau_n`` lives on ``X_{n+1} = X_n ∪ Y_n``.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

from .exact import (ExactError, Interval, IntervalSet, PieceBudget, PiecewiseAffineMap, compose,
                    disagreement, image, invert, rat, transport, union_all, DEFAULT_BUDGET)
from .rankone import RankOneSystem, ResidualTooLarge, rokhlin_tower

Partition = list  # list[IntervalSet], pairwise disjoint


class TransferTooLarge(ExactError):
    code = "TRANSFER_TOO_LARGE"


class ContainmentInfeasible(ExactError):
    code = "CONTAINMENT"


class DepthInsufficient(ExactError):
    code = "DEPTH"


MODES = ("uniform", "literal")


def build_S(n: int, h: int, b_prev) -> tuple[PiecewiseAffineMap, Interval, Interval, Fraction]:
    """Cycle of ``h`` equal subintervals of ``Y = [b_prev, b_prev + 1/n)``."""
    if n < 1 or h < 2:
        raise ValueError("need n >= 1 and h >= 2")
    b_prev = rat(b_prev)
    b = b_prev + Fraction(1, n)
    w = Fraction(1, n * h)
    S = PiecewiseAffineMap([(b_prev, b - w, 1, w), (b - w, b, 1, -(h - 1) * w)])
    return S, Interval(b_prev, b), Interval(b_prev, b_prev + w), b


def solve_transfer(muE, muX, muY, mode: str = "uniform") -> Fraction:
    """Mass ``d`` moved from the cycle into the tower.

    ``literal`` solves ``(E + d)/(X + Y - d) = E/X``; ``uniform`` returns
    ``E*Y/X``, the only value that lets one contraction ratio serve the
    whole space.
    """
    muE, muX, muY = rat(muE), rat(muX), rat(muY)
    if muE < 0 or muX <= 0 or muY <= 0:
        raise ValueError("need muE >= 0 and positive muX, muY")
    if mode == "literal":
        return muE * muY / (muX + muE)
    if mode == "uniform":
        return muE * muY / muX
    raise ValueError(f"unknown transfer mode {mode!r}")


def select_transfer_set(J: Interval, d, h: int) -> IntervalSet:
    """Leftmost slice of ``J`` with measure ``d/h``."""
    d = rat(d)
    if d < 0:
        raise ValueError("transfer must be non-negative")
    width = d / h
    if width > J.length:
        raise TransferTooLarge(f"transfer slice {width} exceeds base length {J.length}")
    if width == 0:
        return IntervalSet.empty()
    return IntervalSet.of(J.lo, J.lo + width)


# -- partitions -------------------------------------------------------------


def _cell_lookup(P: Sequence[IntervalSet]):
    table = sorted((a, b, i) for i, cell in enumerate(P) for a, b in cell.pairs)
    return [t[0] for t in table], table


def _refine_base(R: PiecewiseAffineMap, base: IntervalSet, h: int,
                 P: Sequence[IntervalSet]) -> list[IntervalSet]:
    """Cells of ``base`` with constant itinerary through ``P`` for ``h`` steps."""
    los, table = _cell_lookup(P)
    rl = [p.lo for p in R.pieces]
    # (base_lo, base_hi, slope, offset, signature): current image is slope*x+offset
    pieces = [(a, b, Fraction(1), Fraction(0), ()) for a, b in base.pairs]
    for k in range(h):
        labelled = []
        for a, b, s, o, sig in pieces:
            ya, yb = s * a + o, s * b + o
            i = max(bisect.bisect_right(los, ya) - 1, 0)
            while i < len(table) and table[i][0] < yb:
                lo, hi = max(ya, table[i][0]), min(yb, table[i][1])
                if lo < hi:
                    labelled.append(((lo - o) / s, (hi - o) / s, s, o, sig + (table[i][2],)))
                i += 1
        if sum((b - a for a, b, *_ in labelled), Fraction(0)) != base.measure:
            raise ContainmentInfeasible(f"partition does not cover tower level {k}")
        pieces = labelled
        if k == h - 1:
            break
        advanced = []
        for a, b, s, o, sig in pieces:
            ya, yb = s * a + o, s * b + o
            i = max(bisect.bisect_right(rl, ya) - 1, 0)
            while i < len(R.pieces) and R.pieces[i].lo < yb:
                p = R.pieces[i]
                lo, hi = max(ya, p.lo), min(yb, p.hi)
                if lo < hi:
                    advanced.append(((lo - o) / s, (hi - o) / s, p.slope * s,
                                     p.slope * o + p.offset, sig))
                i += 1
        pieces = advanced
    groups: dict[tuple, list] = {}
    for a, b, _, _, sig in pieces:
        groups.setdefault(sig, []).append((a, b))
    cells = [IntervalSet(v) for v in groups.values()]
    cells.sort(key=lambda c: c.lo)
    return cells


@dataclass(frozen=True)
class Partitions:
    C: list            # cells of the R-tower base
    shares: list       # slice of J \ I* attached to each cell
    P_prime: list      # P_prime[k * len(C) + j] = R^k C[j] ∪ S^k shares[j]
    R_levels: list     # R_levels[k][j] = R^k C[j]

    def __iter__(self):
        return iter((self.C, self.P_prime))


def build_partitions(R: PiecewiseAffineMap, base: IntervalSet, h: int, P_prev: Sequence[IntervalSet],
                     S: PiecewiseAffineMap, J_minus_Istar: IntervalSet) -> Partitions:
    """Itinerary cells of the tower base and the partition of the new tower.

    Each base cell ``c`` is paired with a slice of ``J \\ I*`` proportional
    to its measure, so that the new tower element ``R^k c ∪ S^k(slice)``
    contains its own image under the contraction.
    """
    C = _refine_base(R, base, h, P_prev)
    mu_I = base.measure
    shares = []
    if J_minus_Istar:
        (j0, j1), = J_minus_Istar.pairs
        scale = J_minus_Istar.measure / mu_I
        x = j0
        for c in C:
            y = x + c.measure * scale
            shares.append(IntervalSet.of(x, y))
            x = y
        assert x == j1
    else:
        shares = [IntervalSet.empty() for _ in C]
    R_levels = [list(C)]
    S_levels = [list(shares)]
    for _ in range(1, h):
        R_levels.append([image(R, c) for c in R_levels[-1]])
        S_levels.append([image(S, s) if s else s for s in S_levels[-1]])
    P_prime = [R_levels[k][j] | S_levels[k][j] for k in range(h) for j in range(len(C))]
    return Partitions(C, shares, P_prime, R_levels)


# -- stage state --------------------------------------------------------------


@dataclass(frozen=True)
class StageState:
    n: int
    X: IntervalSet
    Y: Interval
    b: Fraction
    R: PiecewiseAffineMap
    S: PiecewiseAffineMap
    h: int
    eps: Fraction
    J: Interval
    psi: PiecewiseAffineMap          # conjugacy X_n -> X_1
    mode: str = "uniform"
    # filled in by multiplexing
    I: IntervalSet | None = None
    E: IntervalSet | None = None
    I_star: IntervalSet | None = None
    X_prime: IntervalSet | None = None
    d: Fraction | None = None
    C: list | None = None
    P_prime: list | None = None
    Q: list | None = None
    D: IntervalSet | None = None
    tau: PiecewiseAffineMap | None = None
    kappa_ratio: Fraction | None = None
    kappa: Fraction | None = None
    M: int | None = None
    delta: Fraction | None = None

    @property
    def muX(self) -> Fraction:
        return self.X.measure

    @property
    def muY(self) -> Fraction:
        return self.Y.length

    @property
    def multiplexed(self) -> bool:
        return self.tau is not None

    @property
    def T(self) -> PiecewiseAffineMap:
        return self.R.join(self.S)


def build_tau(R: PiecewiseAffineMap, S: PiecewiseAffineMap, base: IntervalSet, h: int,
              parts: Partitions, E: IntervalSet, X_prime: IntervalSet, *,
              budget: PieceBudget | None = None) -> PiecewiseAffineMap:
    """Contraction ``X_{n+1} -> X_n`` carrying each new tower level onto the old.

    On the base each ``c ∪ share`` is squeezed onto ``c`` left to right; level
    ``i`` is conjugated up by ``R^i`` on the R-side and ``S^i`` on the
    cycle side.  The residual ``X'`` is squeezed onto ``E``.
    """
    budget = budget or DEFAULT_BUDGET
    base_maps = []
    for c, sh in zip(parts.C, parts.shares):
        src = c | sh
        if c.measure <= 0:
            raise ContainmentInfeasible("empty base cell")
        base_maps.append(transport(src, c))
    level = PiecewiseAffineMap([p for f in base_maps for p in f.pieces], budget=budget)
    pieces = list(level.pieces)
    R_inv, S_inv = invert(R), invert(S)
    R_lvl = base
    S_lvl = union_all(parts.shares)
    for _ in range(1, h):
        R_next = image(R, R_lvl)
        S_next = image(S, S_lvl) if S_lvl else S_lvl
        down = R_inv.restrict(R_next)
        if S_next:
            down = down.join(S_inv.restrict(S_next))
        level = compose(R, compose(level, down, budget=budget), budget=budget)
        pieces.extend(level.pieces)
        budget.check(len(pieces), "tau")
        R_lvl, S_lvl = R_next, S_next
    if X_prime:
        pieces.extend(transport(X_prime, E).pieces)
    return PiecewiseAffineMap(pieces, budget=budget)


def initial_stage(starter: RankOneSystem, h1: int, eps1, mode: str = "uniform") -> StageState:
    """Stage 1: ``R_1`` is the starter on ``X_1``, ``S_1`` cycles ``[b_0, b_0 + 1)``."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    X1 = starter.space
    b0 = X1.hi
    S, Y, J, b = build_S(1, h1, b0)
    return StageState(n=1, X=X1, Y=Y, b=b, R=starter.map, S=S, h=h1, eps=rat(eps1), J=J,
                      psi=PiecewiseAffineMap.identity(X1), mode=mode)


def tower_for(state: StageState, starter: RankOneSystem) -> tuple[IntervalSet, list[IntervalSet], IntervalSet]:
    """Rokhlin tower of height ``h_n`` for ``R_n`` pulled back from the starter."""
    h = state.h
    X1 = starter.space
    # the conjugacy scales measure by muX_n / muX_1 in uniform mode
    target = state.eps * X1.measure / state.muX
    psi_inv = invert(state.psi)
    base1, _ = rokhlin_tower(starter, h, target)
    I = image(psi_inv, base1)
    levels = [I]
    for _ in range(h - 1):
        levels.append(image(state.R, levels[-1]))
    E = state.X - union_all(levels)
    if not E.measure < state.eps:
        raise ResidualTooLarge(f"stage {state.n}: residual {E.measure} >= eps {state.eps}")
    return I, levels, E


def previous_partition(state: StageState, prev: StageState | None, P1: Sequence[IntervalSet]) -> list[IntervalSet]:
    """``P'_{n-1}`` (completed to a partition of ``X_n``) joined with ``P_n``."""
    psi_inv = invert(state.psi)
    Pn = [image(psi_inv, cell) for cell in P1]
    if prev is None:
        return [c for c in Pn if c]
    cells = list(prev.P_prime)
    rest = state.X - union_all(cells)
    if rest:
        cells.append(rest)
    joined = []
    for a in cells:
        for b in Pn:
            ab = a & b
            if ab:
                joined.append(ab)
    return joined


def multiplex(state: StageState, starter: RankOneSystem, P1: Sequence[IntervalSet],
              prev: StageState | None = None, *, budget: PieceBudget | None = None) -> tuple[StageState, dict]:
    """Run one multiplexing step on ``state``.

    Returns the completed stage ``n`` and the ingredients of stage ``n+1``
    (``X``, ``R``, ``psi``, ``b``) as a dict; :func:`open_stage` turns the
    dict into a stage once ``h_{n+1}`` and ``eps_{n+1}`` are known.
    """
    budget = budget or DEFAULT_BUDGET
    n, h = state.n, state.h
    I, levels, E = tower_for(state, starter)
    d = solve_transfer(E.measure, state.muX, state.muY, state.mode)
    I_star = select_transfer_set(state.J, d, h)
    JmI = state.J.as_set() - I_star
    transfer = [I_star]
    for _ in range(1, h):
        transfer.append(image(state.S, transfer[-1]) if transfer[-1] else transfer[-1])
    X_prime = E | union_all(transfer)
    P_prev = previous_partition(state, prev, P1)
    parts = build_partitions(state.R, I, h, P_prev, state.S, JmI)
    tau = build_tau(state.R, state.S, I, h, parts, E, X_prime, budget=budget)
    X_next = state.X | state.Y.as_set()
    if tau.domain != X_next or tau.range != state.X:
        raise ContainmentInfeasible(f"stage {n}: tau is not a bijection X_{n + 1} -> X_{n}")
    for p, q in zip(parts.P_prime, (lv for row in parts.R_levels for lv in row)):
        if not image(tau, p).issubset(p):
            raise ContainmentInfeasible(f"stage {n}: tau(p) not inside p")
    R_next = compose(invert(tau), compose(state.R, tau, budget=budget), budget=budget)
    T_now = state.T
    D = disagreement(R_next, T_now, X_next)
    ratio = D.measure / (state.eps + Fraction(1, h))
    Q = [image(tau, p) for p in parts.P_prime]
    done = replace(state, I=I, E=E, I_star=I_star, X_prime=X_prime, d=d, C=parts.C,
                   P_prime=parts.P_prime, Q=Q, D=D, tau=tau, kappa_ratio=ratio)
    nxt = dict(n=n + 1, X=X_next, R=R_next, psi=compose(state.psi, tau, budget=budget),
               b_prev=state.b, mode=state.mode)
    return done, nxt


def open_stage(ingredients: dict, h: int, eps) -> StageState:
    n = ingredients["n"]
    S, Y, J, b = build_S(n, h, ingredients["b_prev"])
    return StageState(n=n, X=ingredients["X"], Y=Y, b=b, R=ingredients["R"], S=S, h=h,
                      eps=rat(eps), J=J, psi=ingredients["psi"], mode=ingredients["mode"])


def multiplex_stage(state: StageState, starter: RankOneSystem, P1: Sequence[IntervalSet],
                    h_next: int, eps_next, prev: StageState | None = None) -> tuple[StageState, StageState]:
    done, nxt = multiplex(state, starter, P1, prev)
    return done, open_stage(nxt, h_next, eps_next)


def kappa_bound(ratios: Sequence[Fraction]) -> Fraction:
    """Smallest power of two strictly above every recorded ratio (1 when
    every ratio is zero)."""
    top = max(ratios, default=Fraction(0))
    k = Fraction(1)
    if top <= 0:
        return k
    while k <= top:
        k *= 2
    while k / 2 > top:
        k /= 2
    return k


@dataclass
class Chain:
    """Stages built so far; the last stage is open (not yet multiplexed)."""

    starter: RankOneSystem
    P1: list
    stages: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.stages)

    @property
    def completed(self) -> list[StageState]:
        return [s for s in self.stages if s.multiplexed]

    @property
    def kappa(self) -> Fraction:
        return kappa_bound([s.kappa_ratio for s in self.completed])

    def stage(self, n: int) -> StageState:
        return self.stages[n - 1]

    def T(self, n: int) -> PiecewiseAffineMap:
        return assemble_T(self, n)

    def start(self, h1: int, eps1, mode: str = "uniform") -> StageState:
        if self.stages:
            raise RuntimeError("chain already started")
        self.stages.append(initial_stage(self.starter, h1, eps1, mode))
        return self.stages[-1]

    def advance(self, choose: Callable[[dict], tuple[int, Fraction]] | tuple[int, Fraction],
                *, budget: PieceBudget | None = None) -> StageState:
        """Multiplex the open stage and open the next one.

        ``choose`` is either ``(h, eps)`` or a callable receiving the
        next-stage ingredients and returning ``(h, eps)``.
        """
        cur = self.stages[-1]
        prev = self.stages[-2] if len(self.stages) > 1 else None
        done, nxt = multiplex(cur, self.starter, self.P1, prev, budget=budget)
        self.stages[-1] = done
        h, eps = choose(nxt) if callable(choose) else choose
        self.stages.append(open_stage(nxt, h, eps))
        k = self.kappa
        self.stages = [replace(s, kappa=k) if s.multiplexed else s for s in self.stages]
        return self.stages[-1]


def assemble_T(chain: Chain, N: int) -> PiecewiseAffineMap:
    """``T_N``: ``R_N`` on ``X_N`` joined with ``S_N`` on ``Y_N``."""
    if N < 1 or N > chain.depth:
        raise DepthInsufficient(f"chain has {chain.depth} stages, asked for T_{N}")
    return chain.stage(N).T


def stable_horizon(chain: Chain, A: IntervalSet, n: int, M: int) -> Fraction:
    """Measure of the points of ``A`` whose first ``M`` iterates under the
    deepest ``T`` coincide with their iterates under ``T_{n+1}``."""
    from .kernels import scaled

    if n + 1 > chain.depth:
        raise DepthInsufficient(f"chain has {chain.depth} stages, need stage {n + 1}")
    if M == 0 or n + 1 == chain.depth:
        return A.measure
    T_ref = chain.T(n + 1)
    T_deep = chain.T(chain.depth)
    bad = disagreement(T_deep, T_ref, T_ref.domain)
    return scaled(T_ref, A, bad).stable(A, bad, M)
