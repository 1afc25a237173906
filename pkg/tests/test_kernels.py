"""Integer kernels: compiled and pure-Python backends against exact iteration."""
from __future__ import annotations

import os
import subprocess
import sys
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from towerplex import kernels
from towerplex.exact import IntervalSet, PiecewiseAffineMap, image, invert
from towerplex.kernels import NotMeasurePreserving, ScaledMap, scaled
from towerplex.rankone import RankOneSpec, build_rank_one

BACKENDS = ["python"] + (["cython"] if kernels._compiled is not None else [])


def exact_orbit(f, S, n):
    out = [S]
    for _ in range(n - 1):
        out.append(image(f, out[-1]))
    return out


@pytest.fixture(scope="module")
def chacon():
    return build_rank_one(RankOneSpec.chacon(4), 4).normalized()


@st.composite
def subsets(draw, q=40):
    pts = sorted(set(draw(st.lists(st.integers(0, q), max_size=6))))
    return IntervalSet((F(a, q), F(b, q)) for a, b in zip(pts[::2], pts[1::2]))


@pytest.mark.parametrize("backend", BACKENDS)
@given(A=subsets(), B=subsets())
def test_correlations_match_exact_iteration(backend, chacon, A, B):
    sm = ScaledMap(chacon.map, (A, B), backend=backend)
    orbit = exact_orbit(chacon.map, B, 30)
    assert sm.correlations(A, B, 30) == [(A & Bk).measure for Bk in orbit]


@pytest.mark.parametrize("backend", BACKENDS)
@given(A=subsets())
def test_symdiff_sweep_and_image(backend, chacon, A):
    sm = ScaledMap(chacon.map, (A,), backend=backend)
    orbit = exact_orbit(chacon.map, A, 41)
    times = [0, 1, 5, 3, 40]
    assert sm.symdiffs(A, times) == [(orbit[t] ^ A).measure for t in times]
    covered, expect = IntervalSet.empty(), []
    for S in orbit[:21]:
        covered = covered | S
        expect.append(covered.measure)
    assert sm.sweep(A, 20) == expect
    assert sm.image(A) == orbit[1]


@pytest.mark.parametrize("backend", BACKENDS)
def test_stable_measure(backend, chacon):
    """Measure of x in A with T^k x outside ``bad`` for every k < m."""
    f = chacon.map
    A = IntervalSet.of(0, F(1, 2))
    bad = IntervalSet.of(F(1, 4), F(3, 8))
    sm = ScaledMap(f, (A, bad), backend=backend)
    for m in (0, 1, 3, 7):
        good = A
        for k in range(m):
            # x in A with T^k x in bad, found by pulling bad back k steps
            hit = bad
            for _ in range(k):
                hit = image(invert(f), hit)
            good = good - hit
        assert sm.stable(A, bad, m) == good.measure


def test_backends_agree_on_large_orbit():
    if len(BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    sys_ = build_rank_one(RankOneSpec.chacon(6), 6).normalized()
    A = IntervalSet.of(0, F(1, 3))
    py = ScaledMap(sys_.map, (A,), backend="python")
    cy = ScaledMap(sys_.map, (A,), backend="cython")
    assert py.correlations(A, A, 300) == cy.correlations(A, A, 300)
    assert py.sweep(A, 300) == cy.sweep(A, 300)
    assert py.symdiffs(A, [1, 2, 4, 8, 256]) == cy.symdiffs(A, [1, 2, 4, 8, 256])


def test_denominator_grows_for_new_sets(chacon):
    sm = ScaledMap(chacon.map)
    L0 = sm.L
    A = IntervalSet.of(0, F(1, 7))
    sm.correlations(A, A, 3)
    assert sm.L % 7 == 0 and sm.L % L0 == 0


def test_scaled_is_memoized_per_map(chacon):
    assert scaled(chacon.map) is scaled(chacon.map)


def test_huge_denominators_fall_back_to_python():
    big = F(1, 2 ** 62)
    f = PiecewiseAffineMap([(0, 1 - big, 1, big), (1 - big, 1, 1, big - 1)])
    sm = ScaledMap(f)
    assert sm.backend == "python"
    A = IntervalSet.of(0, F(1, 2))
    assert sm.correlations(A, A, 2) == [F(1, 2), F(1, 2) - big]


def test_rejects_non_unit_slopes():
    with pytest.raises(NotMeasurePreserving):
        ScaledMap(PiecewiseAffineMap([(0, 1, 2, 0)]))


def test_pure_backend_forced_by_environment():
    code = "from towerplex import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, TOWERPLEX_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
