"""Independent reference computations used to check the library.

Nothing here imports the routines under test; each oracle recomputes its
answer by a different method (sympy algebra, brute-force loops, FFT
convolution, dense sampling or exact rational scans).
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import sympy as sp
from scipy.signal import fftconvolve

X, Y = sp.symbols("x y")


# --------------------------------------------------------------------------
# symbolic algebra

def to_expr(terms: dict) -> sp.Expr:
    return sp.Add(*[sp.Rational(c.numerator, c.denominator) * X**a * Y**b for (a, b), c in terms.items()])


def from_expr(expr) -> dict:
    poly = sp.Poly(sp.expand(expr), X, Y)
    return {m: Fraction(int(c.p), int(c.q)) for m, c in poly.terms() if c != 0}


def hessian_terms(terms: dict) -> dict:
    S = to_expr(terms)
    return from_expr(sp.diff(S, X, 2, Y) - sp.diff(S, X, Y, 2))


def sheared_hessian_terms(terms: dict) -> dict:
    """Hessian of the form after ``(x, y) -> (u, u + y)``: ``d_u d_v (d_u + d_v)`` of ``S(u, v - u)``."""
    T = sp.expand(to_expr(terms).subs(Y, Y - X))
    return from_expr(sp.diff(T, X, 2, Y) + sp.diff(T, X, Y, 2))


def order_terms(terms: dict) -> int:
    return min(a + b for a, b in terms)


# --------------------------------------------------------------------------
# Newton polygon by dominance

def _dominated(v, p, q) -> bool:
    """Is some point of the segment [p, q] componentwise <= v?"""
    # t p + (1 - t) q <= v  for some t in [0, 1]; each coordinate gives a half-line in t
    lo, hi = Fraction(0), Fraction(1)
    for i in range(2):
        a = Fraction(p[i] - q[i])
        b = Fraction(v[i] - q[i])
        if a == 0:
            if b < 0:
                return False
        elif a > 0:
            hi = min(hi, b / a)
        else:
            lo = max(lo, b / a)
    return lo <= hi


def hull_vertices(support) -> list[tuple[int, int]]:
    pts = sorted(set(support))
    out = []
    for v in pts:
        others = [p for p in pts if p != v]
        if not any(_dominated(v, p, q) for p, q in itertools.combinations_with_replacement(others, 2)):
            out.append(v)
    return sorted(out)


# --------------------------------------------------------------------------
# trilinear sums

def brute_form(K, f1, f2, f3) -> complex:
    n1, n2 = K.shape
    total = 0j
    for a in range(n1):
        for b in range(n2):
            total += K[a, b] * f1[a] * f2[b] * f3[a + b]
    return total


def fft_form_separable(u, v, f1, f2, f3) -> complex:
    """``sum_{a,b} u[a] v[b] f1[a] f2[b] f3[a+b]`` by one fast convolution."""
    conv = fftconvolve(np.asarray(u) * f1, np.asarray(v) * f2)
    return complex(np.sum(conv * f3))


def brute_bilinear_norm(K, g, k, step: float) -> float:
    """Discrete L2 norm of ``x_a -> step * sum_b K[a, b] g[b] k[a + b]``."""
    n1, n2 = K.shape
    out = np.zeros(n1, dtype=complex)
    for a in range(n1):
        for b in range(n2):
            out[a] += K[a, b] * g[b] * k[a + b]
    out *= step
    return math.sqrt(step * float(np.sum(np.abs(out) ** 2)))


# --------------------------------------------------------------------------
# sampling oracles

def sampled_range(fn, rect, m: int = 201) -> tuple[float, float]:
    x0, x1, y0, y1 = rect
    xs, ys = np.meshgrid(np.linspace(x0, x1, m), np.linspace(y0, y1, m), indexing="ij")
    v = fn(xs, ys)
    return float(v.min()), float(v.max())


def sampled_abs_sup(fn, rect, m: int = 65) -> float:
    lo, hi = sampled_range(fn, rect, m)
    return max(abs(lo), abs(hi))


def brute_overlap(rects: np.ndarray) -> int:
    """Max number of open rectangles containing a point, probing every cell of the corner grid."""
    xs = np.unique(rects[:, :2])
    ys = np.unique(rects[:, 2:])
    cx = 0.5 * (xs[1:] + xs[:-1])
    cy = 0.5 * (ys[1:] + ys[:-1])
    best = 0
    for x in cx:
        inx = (rects[:, 0] < x) & (x < rects[:, 1])
        if not inx.any():
            continue
        sub = rects[inx]
        for y in cy:
            best = max(best, int(np.sum((sub[:, 2] < y) & (y < sub[:, 3]))))
    return best


# --------------------------------------------------------------------------
# dyadic cover by exact rational scan (linear sectors, M = 1)

def linear_sector_cover(j: int, c: Fraction, eps: Fraction, mu: Fraction):
    """Squares of side ``mu 2^j`` meeting ``{2^(j-1) <= x <= 2^(j+1), (c-eps)x < y < (c+eps)x}``
    whose doubles lie in ``{2^(j-2) <= x <= 2^(j+2), (c-2eps)x < y < (c+2eps)x}``.

    Returns (mu, count) after halving ``mu`` until every meeting square passes.
    """
    two = Fraction(2)
    while mu > Fraction(1, 2**20):
        side = mu * two**j
        xa, xb = two ** (j - 1), two ** (j + 1)
        lo, hi = c - eps, c + eps
        ymax = hi * xb
        meeting = []
        for ix in range(math.floor(xa / side) - 2, math.ceil(xb / side) + 2):
            a, b = ix * side, (ix + 1) * side
            a2, b2 = max(a, xa), min(b, xb)
            if a2 > b2:
                continue
            for iy in range(math.floor(lo * xa / side) - 2, math.ceil(ymax / side) + 2):
                cy, dy = iy * side, (iy + 1) * side
                # some x in [a2, b2] and y in [cy, dy] with lo x < y < hi x:
                # need x < dy / lo and x > cy / hi (lo, hi > 0)
                xl = max(a2, cy / hi)
                xr = min(b2, dy / lo)
                if xl < xr or (xl == xr and cy / hi < xl < dy / lo):
                    meeting.append((a, b, cy, dy))
        ok = True
        for a, b, cy, dy in meeting:
            w = b - a
            A, B, C, D = a - w / 2, b + w / 2, cy - w / 2, dy + w / 2
            if not (A >= two ** (j - 2) and B <= two ** (j + 2) and C > (c - 2 * eps) * B and D < (c + 2 * eps) * A):
                ok = False
                break
        if ok and meeting:
            return mu, len(meeting)
        mu /= 2
    raise AssertionError("no admissible mu")
