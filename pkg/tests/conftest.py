"""Shared chains and the acceptance summary printed at the end of a run."""
from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from towerplex.chain import Chain
from towerplex.exact import union_all
from towerplex.rankone import RankOneSpec, build_rank_one
from towerplex.scheduler import Scheduler

settings.register_profile("towerplex", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("towerplex")

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def odometer_chain(heights, depth: int = 10, mode: str = "uniform") -> Chain:
    """Chain on the odometer with ``h_n = heights[n-1]`` and ``eps_n = 1/h_n``."""
    st = build_rank_one(RankOneSpec.odometer(depth), depth)
    ch = Chain(st, st.levels(2))
    ch.start(heights[0], Fraction(1, heights[0]), mode)
    for h in heights[1:]:
        ch.advance((h, Fraction(1, h)))
    return ch


def chacon_starter(depth: int = 8):
    st = build_rank_one(RankOneSpec.chacon(depth), depth).normalized()
    P1 = st.levels(2) + [st.space - union_all(st.levels(2))]
    return st, P1


def chacon_fixed_chain(heights, depth: int = 8, mode: str = "uniform") -> Chain:
    st, P1 = chacon_starter(depth)
    ch = Chain(st, P1)
    ch.start(heights[0], Fraction(1, heights[0]), mode)
    for h in heights[1:]:
        ch.advance((h, Fraction(1, h)))
    return ch


def chacon_auto_chain(stages: int = 3, depth: int = 8, search_cap: int = 400):
    """Auto-scheduled chain; returns ``(chain, scheduler, P1)``."""
    st, P1 = chacon_starter(depth)
    ch = Chain(st, P1)
    sch = Scheduler(search_cap=search_cap)
    h, eps = sch.choose(1, st.map, P1, st.space.measure)
    ch.start(h, eps)
    for _ in range(stages - 1):
        ch.advance(lambda nxt: sch.choose(nxt["n"], nxt["R"], ch.stages[-1].P_prime,
                                          nxt["X"].measure))
    return ch, sch, P1


@pytest.fixture(scope="session")
def odo4():
    """Odometer chain T_1..T_4 with heights 4, 8, 16, 32."""
    return odometer_chain([4, 8, 16, 32])


@pytest.fixture(scope="session")
def odo3():
    return odometer_chain([4, 8, 16])


@pytest.fixture(scope="session")
def odo5():
    return odometer_chain([4, 8, 16, 32, 64])


@pytest.fixture(scope="session")
def chacon_auto():
    return chacon_auto_chain()


@pytest.fixture(scope="session")
def chacon_literal():
    return chacon_fixed_chain([4, 8, 16], mode="literal")


@pytest.fixture(scope="session")
def chacon_uniform():
    return chacon_fixed_chain([4, 8, 16])
