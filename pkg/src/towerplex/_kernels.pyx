# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""int64 kernels over integer-scaled slope-1 maps.

Same contracts as ``_kernels_py``; callers guarantee every endpoint and
offset fits comfortably in a signed 64-bit integer.
"""
from libcpp.vector cimport vector
from libcpp.pair cimport pair
from libcpp.algorithm cimport sort

ctypedef long long i64
ctypedef vector[i64] vec
ctypedef pair[i64, i64] ivl


cdef vec _normalize(vector[ivl]& pairs) noexcept nogil:
    cdef vec out
    cdef size_t k
    cdef i64 a, b
    sort(pairs.begin(), pairs.end())
    for k in range(pairs.size()):
        a = pairs[k].first
        b = pairs[k].second
        if a >= b:
            continue
        if out.size() and a <= out.back():
            if b > out.back():
                out[out.size() - 1] = b
        else:
            out.push_back(a)
            out.push_back(b)
    return out


cdef size_t _locate(const vec& lo, i64 x) noexcept nogil:
    # index of last piece with lo <= x, or 0
    cdef size_t left = 0, right = lo.size(), mid
    while left < right:
        mid = (left + right) // 2
        if lo[mid] <= x:
            left = mid + 1
        else:
            right = mid
    return left - 1 if left > 0 else 0


cdef vec _image(const vec& lo, const vec& hi, const vec& off, const vec& s) noexcept nogil:
    cdef vector[ivl] out
    cdef size_t k, i, n = lo.size()
    cdef i64 a, b, x, y
    k = 0
    while k < s.size():
        a = s[k]
        b = s[k + 1]
        i = _locate(lo, a)
        while i < n and lo[i] < b:
            x = lo[i] if lo[i] > a else a
            y = hi[i] if hi[i] < b else b
            if x < y:
                out.push_back(ivl(x + off[i], y + off[i]))
            i += 1
        k += 2
    return _normalize(out)


cdef vec _sweep(const vec& a, const vec& b, int mode) noexcept nogil:
    cdef vec out
    cdef size_t i = 0, j = 0
    cdef i64 x, start = 0
    cdef bint ia, ib, on, started = False
    cdef int ca = 0, cb = 0
    # merge the two endpoint streams; at each coordinate apply every event
    while i < a.size() or j < b.size():
        if j >= b.size() or (i < a.size() and a[i] <= b[j]):
            x = a[i]
        else:
            x = b[j]
        while i < a.size() and a[i] == x:
            ca += 1 if i % 2 == 0 else -1
            i += 1
        while j < b.size() and b[j] == x:
            cb += 1 if j % 2 == 0 else -1
            j += 1
        ia = ca > 0
        ib = cb > 0
        if mode == 0:
            on = ia and ib
        elif mode == 1:
            on = ia or ib
        elif mode == 2:
            on = ia and not ib
        else:
            on = ia != ib
        if on and not started:
            start = x
            started = True
        elif not on and started:
            out.push_back(start)
            out.push_back(x)
            started = False
    return out


cdef i64 _measure(const vec& s) noexcept nogil:
    cdef i64 total = 0
    cdef size_t k = 0
    while k < s.size():
        total += s[k + 1] - s[k]
        k += 2
    return total


cdef i64 _intersect_measure(const vec& a, const vec& b) noexcept nogil:
    cdef size_t i = 0, j = 0
    cdef i64 total = 0, lo, hi
    while i < a.size() and j < b.size():
        lo = a[i] if a[i] > b[j] else b[j]
        hi = a[i + 1] if a[i + 1] < b[j + 1] else b[j + 1]
        if lo < hi:
            total += hi - lo
        if a[i + 1] < b[j + 1]:
            i += 2
        else:
            j += 2
    return total


def normalize(pairs):
    cdef vector[ivl] v
    for a, b in pairs:
        v.push_back(ivl(a, b))
    return _normalize(v)


def image(vec lo, vec hi, vec off, vec s):
    return _image(lo, hi, off, s)


def intersect(vec a, vec b):
    return _sweep(a, b, 0)


def union(vec a, vec b):
    return _sweep(a, b, 1)


def difference(vec a, vec b):
    return _sweep(a, b, 2)


def symdiff(vec a, vec b):
    return _sweep(a, b, 3)


def measure(vec s):
    return _measure(s)


def intersect_measure(vec a, vec b):
    return _intersect_measure(a, b)


def correlation_series(vec lo, vec hi, vec off, vec a, vec b, Py_ssize_t n):
    cdef vec out
    cdef vec cur = b
    cdef Py_ssize_t k
    with nogil:
        for k in range(n):
            if k:
                cur = _image(lo, hi, off, cur)
            out.push_back(_intersect_measure(a, cur))
    return out


def symdiff_at(vec lo, vec hi, vec off, vec a, vec times):
    cdef vec out
    cdef vec cur = a
    cdef i64 t = 0, ma = _measure(a)
    cdef size_t k
    with nogil:
        for k in range(times.size()):
            while t < times[k]:
                cur = _image(lo, hi, off, cur)
                t += 1
            out.push_back(2 * (ma - _intersect_measure(a, cur)))
    return out


def sweep_series(vec lo, vec hi, vec off, vec f, Py_ssize_t n):
    cdef vec out
    cdef vec cur = f
    cdef vec covered = f
    cdef Py_ssize_t k
    out.push_back(_measure(f))
    with nogil:
        for k in range(n):
            cur = _image(lo, hi, off, cur)
            covered = _sweep(covered, cur, 1)
            out.push_back(_measure(covered))
    return out


def stable_measure(vec lo, vec hi, vec off, vec a, vec bad, Py_ssize_t m):
    cdef vec cur = a
    cdef Py_ssize_t k
    with nogil:
        for k in range(m):
            cur = _sweep(cur, bad, 2)
            if cur.size() == 0:
                break
            cur = _image(lo, hi, off, cur)
    return _measure(cur)
