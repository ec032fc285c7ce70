"""Compiled overlap counting for families of axis-parallel rectangles."""
import numpy as np
from numba import njit


@njit(cache=True)
def _tree_add(t, d, size, l, r, v):
    # range add on leaves [l, r) of a bottom-up max tree with lazy adds
    l += size
    r += size
    l0 = l
    r0 = r - 1
    while l < r:
        if l & 1:
            t[l] += v
            if l < size:
                d[l] += v
            l += 1
        if r & 1:
            r -= 1
            t[r] += v
            if r < size:
                d[r] += v
        l >>= 1
        r >>= 1
    for p in (l0, r0):
        p >>= 1
        while p >= 1:
            t[p] = max(t[2 * p], t[2 * p + 1]) + d[p]
            p >>= 1


@njit(cache=True)
def max_overlap_open(rects):
    """Largest number of open rectangles ``(x0, x1) x (y0, y1)`` sharing a point."""
    n = rects.shape[0]
    ys = np.unique(np.concatenate((rects[:, 2], rects[:, 3])))
    m = ys.size - 1
    if m <= 0:
        return 0
    size = 1
    while size < m:
        size *= 2
    t = np.zeros(2 * size, np.int64)
    d = np.zeros(2 * size, np.int64)
    # events: (x, kind) with closings (kind 0) before openings (kind 1) at equal x
    xs = np.empty(2 * n)
    kinds = np.empty(2 * n, np.int64)
    for i in range(n):
        xs[2 * i] = rects[i, 0]
        kinds[2 * i] = 1
        xs[2 * i + 1] = rects[i, 1]
        kinds[2 * i + 1] = 0
    order = np.argsort(xs * 0.0 + kinds, kind="mergesort")
    order = order[np.argsort(xs[order], kind="mergesort")]
    best = 0
    k = 0
    while k < 2 * n:
        x = xs[order[k]]
        while k < 2 * n and xs[order[k]] == x:
            ev = order[k]
            i = ev // 2
            lo = np.searchsorted(ys, rects[i, 2])
            hi = np.searchsorted(ys, rects[i, 3])
            _tree_add(t, d, size, lo, hi, 1 if kinds[ev] == 1 else -1)
            k += 1
        if t[1] > best:
            best = t[1]
    return best


@njit(cache=True)
def count_containing(rects, pts):
    """For each point, how many open rectangles contain it.

    Rectangles are sorted by left edge; only those starting within the
    widest rectangle's width to the left of a point are scanned.
    """
    order = np.argsort(rects[:, 0])
    x0 = rects[order, 0]
    width = np.max(rects[:, 1] - rects[:, 0])
    out = np.zeros(pts.shape[0], np.int64)
    for p in range(pts.shape[0]):
        x = pts[p, 0]
        y = pts[p, 1]
        start = np.searchsorted(x0, x - width, side="left")
        stop = np.searchsorted(x0, x, side="left")
        c = 0
        for q in range(start, stop):
            i = order[q]
            if rects[i, 0] < x < rects[i, 1] and rects[i, 2] < y < rects[i, 3]:
                c += 1
        out[p] = c
    return out
