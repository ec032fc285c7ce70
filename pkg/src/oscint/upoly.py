"""Exact univariate polynomials over the rationals and real-root isolation.

A polynomial is a tuple of Fractions in ascending degree order with no
trailing zeros; the zero polynomial is the empty tuple.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

UPoly = tuple  # tuple[Fraction, ...]

ROOT_TOL = Fraction(1, 10**12)


def upoly(coeffs: Iterable) -> UPoly:
    out = [Fraction(c) for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


def deg(p: UPoly) -> int:
    return len(p) - 1


def lead(p: UPoly) -> Fraction:
    return p[-1]


def uadd(p: UPoly, q: UPoly) -> UPoly:
    n = max(len(p), len(q))
    return upoly((p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n))


def uscale(p: UPoly, c) -> UPoly:
    return upoly(c * a for a in p)


def umul(p: UPoly, q: UPoly) -> UPoly:
    if not p or not q:
        return ()
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return upoly(out)


def uderiv(p: UPoly) -> UPoly:
    return upoly(i * p[i] for i in range(1, len(p)))


def udivmod(p: UPoly, q: UPoly) -> tuple[UPoly, UPoly]:
    if not q:
        raise ZeroDivisionError("polynomial division by zero")
    r = list(p)
    quot = [Fraction(0)] * max(len(p) - len(q) + 1, 1)
    lq = q[-1]
    while len(r) >= len(q) and r:
        shift = len(r) - len(q)
        c = r[-1] / lq
        quot[shift] = c
        for i, b in enumerate(q):
            r[shift + i] -= c * b
        r.pop()
        while r and r[-1] == 0:
            r.pop()
    return upoly(quot), tuple(r)


def monic(p: UPoly) -> UPoly:
    return uscale(p, 1 / p[-1]) if p else p


def ugcd(p: UPoly, q: UPoly) -> UPoly:
    while q:
        p, q = q, udivmod(p, q)[1]
    return monic(p)


def ueval(p: UPoly, t):
    acc = 0 * t if isinstance(t, Fraction) else 0.0
    for c in reversed(p):
        acc = acc * t + (c if isinstance(t, Fraction) else float(c))
    return acc


def squarefree_decomposition(p: UPoly) -> list[tuple[UPoly, int]]:
    """Yun's algorithm: ``p = c * prod f_k^k`` with squarefree, coprime ``f_k``."""
    if deg(p) < 1:
        return []
    out = []
    dp = uderiv(p)
    a = ugcd(p, dp)
    b = udivmod(p, a)[0]
    c = udivmod(dp, a)[0]
    d = uadd(c, uscale(uderiv(b), -1))
    k = 1
    while deg(b) >= 1:
        a = ugcd(b, d)
        if deg(a) >= 1:
            out.append((monic(a), k))
        b = udivmod(b, a)[0]
        c = udivmod(d, a)[0]
        d = uadd(c, uscale(uderiv(b), -1))
        k += 1
    return out


def sturm_sequence(p: UPoly) -> list[UPoly]:
    seq = [p, uderiv(p)]
    while seq[-1]:
        r = udivmod(seq[-2], seq[-1])[1]
        if not r:
            break
        seq.append(uscale(r, -1))
    return seq


def _sign_changes(seq: Sequence[UPoly], t: Fraction) -> int:
    count, prev = 0, 0
    for q in seq:
        v = ueval(q, t)
        if v:
            s = 1 if v > 0 else -1
            if prev and s != prev:
                count += 1
            prev = s
    return count


def root_bound(p: UPoly) -> Fraction:
    """Cauchy bound: every real root lies in (-B, B)."""
    return 1 + max(abs(c / p[-1]) for c in p[:-1]) if deg(p) >= 1 else Fraction(1)


@dataclass(frozen=True)
class IsolatedRoot:
    lo: Fraction
    hi: Fraction
    multiplicity: int

    @property
    def value(self) -> float:
        return float((self.lo + self.hi) / 2)


def isolate_real_roots(p: UPoly, tol: Fraction = ROOT_TOL) -> list[tuple[Fraction, Fraction]]:
    """Disjoint intervals ``[lo, hi]`` each containing exactly one root of the
    squarefree polynomial ``p``, refined to width at most ``tol``.

    Exact roots hit by bisection come back as degenerate intervals.
    """
    if deg(p) < 1:
        return []
    seq = sturm_sequence(p)
    B = root_bound(p)
    found: list[tuple[Fraction, Fraction]] = []
    stack = [(-B, B)]
    while stack:
        lo, hi = stack.pop()
        n = _sign_changes(seq, lo) - _sign_changes(seq, hi)
        if n == 0:
            continue
        if n == 1:
            found.append(_refine(p, lo, hi, tol))
            continue
        mid = (lo + hi) / 2
        if ueval(p, mid) == 0:
            found.append((mid, mid))
            # exclude the exact root from both halves
            eps = (hi - lo) / 2**20
            while _sign_changes(seq, mid - eps) - _sign_changes(seq, mid + eps) != 1:
                eps /= 2
            stack.append((lo, mid - eps))
            stack.append((mid + eps, hi))
        else:
            stack.append((lo, mid))
            stack.append((mid, hi))
    return sorted(found)


def _refine(p: UPoly, lo: Fraction, hi: Fraction, tol: Fraction) -> tuple[Fraction, Fraction]:
    # one simple root in (lo, hi]; sign-change bisection
    flo = ueval(p, lo)
    if ueval(p, hi) == 0:
        return hi, hi
    while hi - lo > tol:
        mid = (lo + hi) / 2
        fm = ueval(p, mid)
        if fm == 0:
            return mid, mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo, hi


def real_roots(p: UPoly, tol: Fraction = ROOT_TOL) -> list[IsolatedRoot]:
    """All real roots with multiplicities, sorted ascending."""
    if not p:
        raise ValueError("zero polynomial has no finite root set")
    roots = []
    for f, k in squarefree_decomposition(p):
        for lo, hi in isolate_real_roots(f, tol):
            roots.append(IsolatedRoot(lo, hi, k))
    return sorted(roots, key=lambda r: r.lo)


def count_roots_in(p: UPoly, lo: Fraction, hi: Fraction) -> int:
    """Distinct real roots in the half-open interval ``(lo, hi]``."""
    f = monic(p)
    sf = udivmod(f, ugcd(f, uderiv(f)))[0] if deg(f) >= 1 else f
    if deg(sf) < 1:
        return 0
    seq = sturm_sequence(sf)
    return _sign_changes(seq, Fraction(lo)) - _sign_changes(seq, Fraction(hi))


def format_upoly(p: UPoly, var: str = "t") -> str:
    if not p:
        return "0"
    parts = []
    for e in range(len(p) - 1, -1, -1):
        c = p[e]
        if not c:
            continue
        mag = abs(c)
        cs = str(mag.numerator) if mag.denominator == 1 else f"{mag.numerator}/{mag.denominator}"
        if e == 0:
            body = cs
        else:
            mono = var if e == 1 else f"{var}^{e}"
            body = mono if mag == 1 else f"{cs}*{mono}"
        parts.append(("- " if c < 0 else "+ ") + body)
    out = " ".join(parts)
    return out[2:] if out.startswith("+ ") else "-" + out[2:]
