"""Compiled contractions of the discrete trilinear form.

``K`` is the ``nx x ny`` kernel, ``f3`` lives on the sum lattice of length
``nx + ny - 1`` so that index ``a + b`` is the exact sum of the two grid points.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def form_value(K, f1, f2, f3):
    nx, ny = K.shape
    s = 0j
    for a in range(nx):
        acc = 0j
        for b in range(ny):
            acc += K[a, b] * f2[b] * f3[a + b]
        s += f1[a] * acc
    return s


@njit(cache=True, nogil=True)
def contract_first(K, f2, f3):
    # out[a] = sum_b K[a, b] f2[b] f3[a + b]
    nx, ny = K.shape
    out = np.zeros(nx, np.complex128)
    for a in range(nx):
        acc = 0j
        for b in range(ny):
            acc += K[a, b] * f2[b] * f3[a + b]
        out[a] = acc
    return out


@njit(cache=True, nogil=True)
def contract_second(K, f1, f3):
    # out[b] = sum_a K[a, b] f1[a] f3[a + b]
    nx, ny = K.shape
    out = np.zeros(ny, np.complex128)
    for a in range(nx):
        fa = f1[a]
        if fa == 0:
            continue
        for b in range(ny):
            out[b] += K[a, b] * fa * f3[a + b]
    return out


@njit(cache=True, nogil=True)
def contract_third(K, f1, f2):
    # out[c] = sum_{a + b = c} K[a, b] f1[a] f2[b]
    nx, ny = K.shape
    out = np.zeros(nx + ny - 1, np.complex128)
    for a in range(nx):
        fa = f1[a]
        if fa == 0:
            continue
        for b in range(ny):
            out[a + b] += K[a, b] * fa * f2[b]
    return out


@njit(cache=True, nogil=True)
def abs_form_bound(K, f1, f2, f3):
    """``sum |K f1 f2 f3|``, the triangle-inequality majorant of the form."""
    nx, ny = K.shape
    s = 0.0
    for a in range(nx):
        for b in range(ny):
            s += abs(K[a, b]) * abs(f1[a]) * abs(f2[b]) * abs(f3[a + b])
    return s


@njit(cache=True, nogil=True)
def bernstein_bounds(A, rects, sub, comb, Lx, Ly):
    """Bernstein enclosures of the float polynomial ``A`` on many rectangles.

    Each rectangle is split into ``sub x sub`` cells. Returns the lowest and
    highest Bernstein coefficient over all cells (an enclosure up to
    rounding) and the lowest and highest value attained at cell corners.
    """
    N = rects.shape[0]
    nx = A.shape[0] - 1
    ny = A.shape[1] - 1
    lo = np.empty(N)
    hi = np.empty(N)
    amin = np.empty(N)
    amax = np.empty(N)
    T1 = np.empty((nx + 1, ny + 1))
    T = np.empty((nx + 1, ny + 1))
    px = np.empty(nx + 1)
    py = np.empty(ny + 1)
    for r in range(N):
        w = (rects[r, 1] - rects[r, 0]) / sub
        v = (rects[r, 3] - rects[r, 2]) / sub
        blo = np.inf
        bhi = -np.inf
        vlo = np.inf
        vhi = -np.inf
        for sx in range(sub):
            cx = rects[r, 0] + sx * w
            px[0] = 1.0
            for e in range(1, nx + 1):
                px[e] = px[e - 1] * cx
            for sy in range(sub):
                cy = rects[r, 2] + sy * v
                py[0] = 1.0
                for e in range(1, ny + 1):
                    py[e] = py[e - 1] * cy
                # shift and scale in x
                for b in range(ny + 1):
                    wk = 1.0
                    for k in range(nx + 1):
                        s = 0.0
                        for i in range(k, nx + 1):
                            s += comb[i, k] * A[i, b] * px[i - k]
                        T1[k, b] = s * wk
                        wk *= w
                # then in y
                for k in range(nx + 1):
                    vl = 1.0
                    for l in range(ny + 1):
                        s = 0.0
                        for b in range(l, ny + 1):
                            s += comb[b, l] * T1[k, b] * py[b - l]
                        T[k, l] = s * vl
                        vl *= v
                # power to Bernstein, one axis at a time
                for i in range(nx + 1):
                    for l in range(ny + 1):
                        s = 0.0
                        for k in range(i + 1):
                            s += Lx[i, k] * T[k, l]
                        T1[i, l] = s
                for i in range(nx + 1):
                    for jj in range(ny + 1):
                        s = 0.0
                        for l in range(jj + 1):
                            s += Ly[jj, l] * T1[i, l]
                        if s < blo:
                            blo = s
                        if s > bhi:
                            bhi = s
                        if (i == 0 or i == nx) and (jj == 0 or jj == ny):
                            if s < vlo:
                                vlo = s
                            if s > vhi:
                                vhi = s
        lo[r] = blo
        hi[r] = bhi
        amin[r] = vlo
        amax[r] = vhi
    return lo, hi, amin, amax
