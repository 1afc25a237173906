"""Pure-Python kernels over integer-scaled slope-1 maps.

Sets are flat lists ``[a0, b0, a1, b1, ...]`` of integer endpoints (half-open
intervals, sorted, disjoint, merged).  A map is three parallel lists
``lo, hi, off`` of sorted pieces ``[lo, hi) -> x + off``.  All values are
numerators over one common denominator chosen by the caller.

``_kernels.pyx`` implements the same functions in C++ for int64 inputs.
"""
from bisect import bisect_right


def normalize(pairs):
    pairs.sort()
    out = []
    for a, b in pairs:
        if a >= b:
            continue
        if out and a <= out[-1]:
            if b > out[-1]:
                out[-1] = b
        else:
            out.append(a)
            out.append(b)
    return out


def image(lo, hi, off, s):
    out = []
    n = len(lo)
    for k in range(0, len(s), 2):
        a, b = s[k], s[k + 1]
        i = bisect_right(lo, a) - 1
        if i < 0:
            i = 0
        while i < n and lo[i] < b:
            x = lo[i] if lo[i] > a else a
            y = hi[i] if hi[i] < b else b
            if x < y:
                out.append((x + off[i], y + off[i]))
            i += 1
    return normalize(out)


def _sweep(a, b, mode):
    # mode: 0 intersect, 1 union, 2 difference a-b, 3 symmetric difference
    events = []
    for k in range(0, len(a), 2):
        events.append((a[k], 0, 1))
        events.append((a[k + 1], 0, -1))
    for k in range(0, len(b), 2):
        events.append((b[k], 1, 1))
        events.append((b[k + 1], 1, -1))
    events.sort()
    ca = cb = 0
    out = []
    start = None
    i = 0
    n = len(events)
    while i < n:
        x = events[i][0]
        while i < n and events[i][0] == x:
            if events[i][1]:
                cb += events[i][2]
            else:
                ca += events[i][2]
            i += 1
        ia, ib = ca > 0, cb > 0
        if mode == 0:
            on = ia and ib
        elif mode == 1:
            on = ia or ib
        elif mode == 2:
            on = ia and not ib
        else:
            on = ia != ib
        if on and start is None:
            start = x
        elif not on and start is not None:
            out.append(start)
            out.append(x)
            start = None
    return out


def intersect(a, b):
    return _sweep(a, b, 0)


def union(a, b):
    return _sweep(a, b, 1)


def difference(a, b):
    return _sweep(a, b, 2)


def symdiff(a, b):
    return _sweep(a, b, 3)


def measure(s):
    return sum(s[k + 1] - s[k] for k in range(0, len(s), 2))


def intersect_measure(a, b):
    i = j = 0
    total = 0
    na, nb = len(a), len(b)
    while i < na and j < nb:
        lo = a[i] if a[i] > b[j] else b[j]
        hi = a[i + 1] if a[i + 1] < b[j + 1] else b[j + 1]
        if lo < hi:
            total += hi - lo
        if a[i + 1] < b[j + 1]:
            i += 2
        else:
            j += 2
    return total


def correlation_series(lo, hi, off, a, b, n):
    """``[m(A ∩ T^k B) for k in range(n)]``."""
    out = []
    cur = b
    for k in range(n):
        if k:
            cur = image(lo, hi, off, cur)
        out.append(intersect_measure(a, cur))
    return out


def symdiff_at(lo, hi, off, a, times):
    """``m(T^t A △ A)`` for each ``t`` in the sorted list ``times``."""
    out = []
    cur = a
    t = 0
    ma = measure(a)
    for target in times:
        while t < target:
            cur = image(lo, hi, off, cur)
            t += 1
        out.append(2 * (ma - intersect_measure(a, cur)))
    return out


def sweep_series(lo, hi, off, f, n):
    """Measures of ``∪_{i<=N} T^i F`` for ``N = 0..n``."""
    covered = f
    cur = f
    out = [measure(f)]
    for _ in range(n):
        cur = image(lo, hi, off, cur)
        covered = union(covered, cur)
        out.append(measure(covered))
    return out


def stable_measure(lo, hi, off, a, bad, m):
    """Measure of points of ``A`` whose first ``m`` iterates avoid ``bad``."""
    cur = a
    for _ in range(m):
        cur = difference(cur, bad)
        if not cur:
            return 0
        cur = image(lo, hi, off, cur)
    return measure(cur)
