"""Exact interval sets and piecewise-affine maps."""
from __future__ import annotations

from fractions import Fraction as F
from math import lcm

import pytest
from hypothesis import given, strategies as st

from towerplex.exact import (DomainMismatch, Interval, IntervalSet, InvalidMap, PieceBudget,
                             PieceBudgetExceeded, PiecewiseAffineMap, PointOutsideDomain,
                             SetOutsideDomain, apply, common_denominator, compose,
                             disagreement, format_rat, image, invert, iterate, measure,
                             parse_map_lines, parse_rat, parse_set_lines, preimage,
                             set_algebra, to_set_lines, transport)
from towerplex.rankone import RankOneSpec, build_rank_one

# -- strategies -----------------------------------------------------------------------

DENOMS = st.sampled_from([1, 2, 3, 4, 5, 6, 8, 12])


@st.composite
def rationals(draw, lo=0, hi=2):
    q = draw(DENOMS)
    n = draw(st.integers(lo * q, hi * q))
    return F(n, q)


@st.composite
def interval_sets(draw, lo=0, hi=2, max_size=4):
    pts = draw(st.lists(rationals(lo, hi), max_size=2 * max_size))
    pts = sorted(pts)
    return IntervalSet(zip(pts[::2], pts[1::2]))


def rotation(alpha, length=1):
    """Rotation by ``alpha`` on ``[0, length)`` as a two-piece exchange."""
    alpha = F(alpha)
    return PiecewiseAffineMap([(0, length - alpha, 1, alpha), (length - alpha, length, 1, alpha - length)])


@st.composite
def exchanges(draw):
    """Random slope-1 interval exchanges of ``[0, 1)``."""
    q = draw(st.sampled_from([2, 3, 4, 6, 8]))
    cuts = sorted(set(draw(st.lists(st.integers(1, q - 1), max_size=4))))
    bounds = [0] + cuts + [q]
    blocks = [(F(a, q), F(b, q)) for a, b in zip(bounds, bounds[1:])]
    order = draw(st.permutations(range(len(blocks))))
    pieces, pos = [], F(0)
    for k in order:
        a, b = blocks[k]
        pieces.append((a, b, 1, pos - a))
        pos += b - a
    return PiecewiseAffineMap(pieces)


# -- brute-force oracle for set algebra ----------------------------------------------


def cells(S: IntervalSet, L: int) -> set[int]:
    out = set()
    for a, b in S.pairs:
        out.update(range(int(a * L), int(b * L)))
    return out


def from_cells(cs: set[int], L: int) -> IntervalSet:
    return IntervalSet((F(c, L), F(c + 1, L)) for c in cs)


# -- measure / set algebra ------------------------------------------------------------


def test_measure_examples():
    assert measure(IntervalSet.of(0, 1)) == 1
    assert measure(IntervalSet.empty()) == 0
    assert measure(IntervalSet([(0, F(1, 3)), (F(1, 2), F(5, 6))])) == F(2, 3)


def test_set_algebra_examples():
    A = IntervalSet([(0, F(1, 3)), (F(1, 2), 1)])
    assert set_algebra(A, A, "symmetric_difference") == IntervalSet.empty()
    assert set_algebra(IntervalSet.of(0, F(1, 2)), IntervalSet.of(F(1, 4), 1), "intersect") \
        == IntervalSet.of(F(1, 4), F(1, 2))
    merged = set_algebra(IntervalSet.of(0, F(1, 2)), IntervalSet.of(F(1, 2), 1), "union")
    assert merged == IntervalSet.of(0, 1) and len(merged) == 1
    with pytest.raises(ValueError):
        set_algebra(A, A, "xor")


@given(interval_sets(), interval_sets())
def test_set_algebra_matches_grid_oracle(A, B):
    L = 1
    for d in A.denominators() | B.denominators():
        L = lcm(L, d)
    ca, cb = cells(A, L), cells(B, L)
    expect = {"union": ca | cb, "intersect": ca & cb, "difference": ca - cb,
              "symmetric_difference": ca ^ cb}
    for op, cs in expect.items():
        got = set_algebra(A, B, op)
        assert got == from_cells(cs, L)
        assert got.measure == F(len(cs), L)


@given(interval_sets())
def test_normalization_idempotent(A):
    assert IntervalSet(A.pairs) == A
    assert A.normalized().pairs == A.pairs
    # sorted, disjoint and non-adjacent
    for (a, b), (c, d) in zip(A.pairs, A.pairs[1:]):
        assert a < b < c < d


@given(interval_sets(), interval_sets())
def test_operators_agree_with_set_algebra(A, B):
    assert A | B == set_algebra(A, B, "union")
    assert A & B == set_algebra(A, B, "intersect")
    assert A - B == set_algebra(A, B, "difference")
    assert A ^ B == set_algebra(A, B, "symmetric_difference")
    assert (A & B).issubset(A) and (A - B).isdisjoint(B)


def test_half_open_membership():
    S = IntervalSet.of(0, F(1, 2))
    assert 0 in S and F(1, 2) not in S
    assert Interval(0, 1).length == 1
    with pytest.raises(ValueError):
        Interval(1, 1)


# -- apply / invert / compose / iterate ---------------------------------------------


def test_apply_examples():
    assert apply(PiecewiseAffineMap.identity(IntervalSet.of(0, 1)), F(1, 3)) == F(1, 3)
    S1 = PiecewiseAffineMap([(1, F(7, 4), 1, F(1, 4)), (F(7, 4), 2, 1, F(-3, 4))])
    assert apply(S1, 1) == F(5, 4)
    half = PiecewiseAffineMap([(0, 1, F(1, 2), 0)])
    assert apply(half, F(1, 2)) == F(1, 4)
    with pytest.raises(PointOutsideDomain):
        apply(half, 1)


def test_invert_examples():
    ident = PiecewiseAffineMap.identity(IntervalSet.of(0, 1))
    assert invert(ident) == ident
    rot = rotation(F(1, 2))
    inv = invert(rot)
    for k in range(10):
        x = F(k, 10)
        assert apply(inv, apply(rot, x)) == x
        assert apply(rot, apply(inv, x)) == x
    dbl = PiecewiseAffineMap([(0, 1, 2, 0)])
    assert invert(dbl) == PiecewiseAffineMap([(0, 2, F(1, 2), 0)])


@given(exchanges())
def test_invert_involution_and_composition(f):
    assert invert(invert(f)) == f
    assert compose(f, invert(f)) == PiecewiseAffineMap.identity(f.range)
    assert compose(invert(f), f) == PiecewiseAffineMap.identity(f.domain)


def test_compose_examples():
    g = rotation(F(1, 3))
    ident = PiecewiseAffineMap.identity(g.range)
    assert compose(ident, g) == g
    t1 = PiecewiseAffineMap.translation(IntervalSet.of(0, 1), F(1, 2))
    t2 = PiecewiseAffineMap.translation(IntervalSet.of(F(1, 2), F(3, 2)), F(1, 4))
    assert compose(t2, t1) == PiecewiseAffineMap.translation(IntervalSet.of(0, 1), F(3, 4))
    up = PiecewiseAffineMap([(0, 1, 2, 0)])
    down = PiecewiseAffineMap([(0, 2, F(1, 2), 0)])
    both = compose(up, down)
    assert both.slopes == {1} and both.is_measure_preserving
    with pytest.raises(DomainMismatch):
        compose(PiecewiseAffineMap.identity(IntervalSet.of(0, F(1, 2))), rotation(F(1, 3)))


def test_compose_respects_piece_budget():
    f = rotation(F(1, 7))
    with pytest.raises(PieceBudgetExceeded):
        compose(rotation(F(1, 5)), f, budget=PieceBudget(2))


@given(exchanges(), st.integers(-6, 6), st.integers(-6, 6),
       st.lists(st.integers(0, 119), min_size=20, max_size=20))
def test_iterate_additivity(f, a, b, xs):
    lhs = iterate(f, a + b)
    rhs = compose(iterate(f, a), iterate(f, b))
    for x in xs:
        x = F(x, 120)
        assert apply(lhs, x) == apply(rhs, x)


def test_iterate_examples():
    rot = rotation(F(1, 4))
    assert iterate(rot, 0) == PiecewiseAffineMap.identity(rot.domain)
    S1 = PiecewiseAffineMap([(1, F(7, 4), 1, F(1, 4)), (F(7, 4), 2, 1, F(-3, 4))])
    assert iterate(S1, 4) == PiecewiseAffineMap.identity(IntervalSet.of(1, 2))
    odo = build_rank_one(RankOneSpec.odometer(6), 6).map

    def carry(x, k):
        # adding k at the first binary digit with carry to the right
        bits = [int(x * 2 ** (j + 1)) % 2 for j in range(6)]
        value = sum(b << j for j, b in enumerate(bits)) + k
        return sum(F((value >> j) & 1, 2 ** (j + 1)) for j in range(6))

    # 0.01 -> 0.11 -> 0.001 in binary
    assert apply(iterate(odo, 1), F(1, 4)) == F(3, 4)
    assert apply(iterate(odo, 2), F(1, 4)) == carry(F(1, 4), 2) == F(1, 8)
    for k in range(1, 10):
        for n in range(64):
            x = F(n, 64)
            assert apply(iterate(odo, k), x) == carry(x, k)
    with pytest.raises(DomainMismatch):
        iterate(PiecewiseAffineMap([(0, 1, 1, 1)]), 2)


# -- image --------------------------------------------------------------------------


def test_image_examples():
    A = IntervalSet([(0, F(1, 3)), (F(1, 2), 1)])
    assert image(PiecewiseAffineMap.identity(IntervalSet.of(0, 1)), A) == A
    S1 = PiecewiseAffineMap([(1, F(7, 4), 1, F(1, 4)), (F(7, 4), 2, 1, F(-3, 4))])
    assert image(S1, IntervalSet.of(1, F(5, 4))) == IntervalSet.of(F(5, 4), F(3, 2))
    half = PiecewiseAffineMap([(0, 1, F(1, 2), 0)])
    assert image(half, IntervalSet.of(0, 1)).measure == F(1, 2)
    with pytest.raises(SetOutsideDomain):
        image(half, IntervalSet.of(0, 2))


@given(exchanges(), interval_sets(0, 1))
def test_slope_one_images_preserve_measure(f, A):
    assert image(f, A).measure == A.measure
    assert preimage(f, A).measure == A.measure
    assert image(invert(f), image(f, A)) == A


def test_invalid_maps_rejected():
    with pytest.raises(InvalidMap):
        PiecewiseAffineMap([(0, 1, 1, 0), (1, 2, 1, -1)])   # both onto [0, 1)
    with pytest.raises(InvalidMap):
        PiecewiseAffineMap([(0, 1, 0, 0)])


# -- transport / disagreement ----------------------------------------------------------


def test_transport_is_order_preserving_uniform_scaling():
    src = IntervalSet([(0, 1), (2, 3)])
    dst = IntervalSet.of(10, 11)
    t = transport(src, dst)
    assert t.slopes == {F(1, 2)}
    assert image(t, src) == dst
    assert apply(t, F(1, 2)) == F(41, 4) and apply(t, 2) == F(21, 2)


def test_disagreement_is_exact():
    f = rotation(F(1, 4))
    g = PiecewiseAffineMap([(0, F(3, 4), 1, F(1, 4)), (F(3, 4), 1, 1, F(-3, 4))])
    assert disagreement(f, g) == IntervalSet.empty()
    h = rotation(F(1, 2))
    assert disagreement(f, h) == IntervalSet.of(0, 1)
    partial = PiecewiseAffineMap([(0, F(1, 2), 1, F(1, 4)), (F(1, 2), F(3, 4), 1, F(1, 4)),
                                  (F(3, 4), 1, 1, F(-3, 4))])
    assert disagreement(f, partial.restrict(IntervalSet.of(0, F(1, 2)))) == IntervalSet.of(F(1, 2), 1)


# -- text forms ----------------------------------------------------------------------------


@given(rationals(-3, 3))
def test_rational_text_round_trip(q):
    text = format_rat(q)
    assert parse_rat(text) == q
    assert ("/" in text) == (q.denominator != 1)


def test_rational_text_rejects_decimals():
    with pytest.raises(ValueError):
        parse_rat("0.5")


@given(interval_sets(), exchanges())
def test_serialization_round_trip(A, f):
    assert parse_set_lines(to_set_lines(A)) == A
    assert parse_map_lines(f.to_lines()) == f


def test_common_denominator():
    assert common_denominator(IntervalSet.of(F(1, 4), F(1, 3)), rotation(F(1, 6))) == 12
