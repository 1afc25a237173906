"""Compare the compiled and pure-Python integer kernels.

Run with ``python3 benchmarks/bench_kernels.py [--depth D] [--n N] [--repeat R]``.
Both backends are checked to return identical exact values before timing.
"""
from __future__ import annotations

import argparse
import time

from towerplex.exact import IntervalSet
from towerplex.kernels import _compiled, ScaledMap
from towerplex.rankone import RankOneSpec, build_rank_one


def workloads(sm: ScaledMap, A: IntervalSet, n: int):
    yield "correlations", lambda: sm.correlations(A, A, n)
    yield "symdiffs", lambda: sm.symdiffs(A, [2 ** m for m in range(n.bit_length())])
    yield "sweep", lambda: sm.sweep(A, n)


def best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=6, help="Chacon stage used as the test map")
    ap.add_argument("--n", type=int, default=400, help="series length")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    system = build_rank_one(RankOneSpec.chacon(args.depth), args.depth).normalized()
    A = IntervalSet.of(0, system.space.hi / 3)
    backends = ["python"] + (["cython"] if _compiled is not None else [])
    maps = {b: ScaledMap(system.map, (A,), backend=b) for b in backends}
    print(f"map pieces: {len(system.map)}  n = {args.n}  backends: {', '.join(backends)}")
    print(f"{'kernel':<14}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, _ in workloads(maps["python"], A, args.n):
        results = {}
        times = {}
        for b in backends:
            fn = dict(workloads(maps[b], A, args.n))[name]
            results[b] = fn()
            times[b] = best_of(fn, args.repeat)
        if len({repr(v) for v in results.values()}) != 1:
            raise SystemExit(f"{name}: backends disagree")
        speed = f"{times['python'] / times['cython']:>9.1f}x" if "cython" in times else f"{'-':>10}"
        print(f"{name:<14}" + "".join(f"{times[b]:>11.4f}s" for b in backends) + speed)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
