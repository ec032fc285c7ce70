"""Newton polygon of the convolution Hessian, its compact edges and the order at the origin."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

from .poly import BivarPoly, convolution_hessian
from .upoly import UPoly, format_upoly, real_roots, upoly, ueval

DEGENERATE = "degenerate"


class DegeneratePhaseError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeRoot:
    value: float
    multiplicity: int
    sign: Literal["+", "-", "0"]
    lo: Fraction
    hi: Fraction

    @property
    def active(self) -> bool:
        # only positive roots are analysed directly; the rest go through reflections
        return self.sign == "+"

    @property
    def exact(self) -> Fraction:
        return (self.lo + self.hi) / 2


@dataclass(frozen=True)
class EdgeData:
    endpoints: tuple[tuple[int, int], tuple[int, int]]
    M: Fraction
    p: UPoly
    real_roots: tuple[EdgeRoot, ...]

    @property
    def weighted_degree(self) -> Fraction:
        A, B = self.endpoints[0]
        return A + self.M * B

    def describe(self) -> str:
        return format_upoly(self.p)


@dataclass(frozen=True)
class NewtonData:
    vertices: tuple[tuple[int, int], ...]
    edges: tuple[EdgeData, ...]
    d: int
    exponent: Fraction
    H: BivarPoly = field(repr=False, compare=False, default=None)


def order_at_origin(H: BivarPoly) -> int:
    if H.is_zero():
        raise DegeneratePhaseError("degenerate phase: no Newton data")
    return min(a + b for a, b in H.support)


def predicted_decay(S: BivarPoly) -> Fraction | str:
    H = convolution_hessian(S)
    if H.is_zero():
        return DEGENERATE
    return Fraction(1, 2 * (3 + order_at_origin(H)))


def _cross(o, a, b) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def newton_vertices(H: BivarPoly) -> list[tuple[int, int]]:
    """Vertices of the Newton polygon, first coordinate increasing."""
    if H.is_zero():
        raise DegeneratePhaseError("degenerate phase: no Newton data")
    # only the staircase of minimal points can be a vertex
    best: dict[int, int] = {}
    for a, b in H.support:
        best[a] = min(b, best.get(a, b))
    stair = []
    for a in sorted(best):
        if not stair or best[a] < stair[-1][1]:
            stair.append((a, best[a]))
    hull: list[tuple[int, int]] = []
    for pt in stair:
        # keep strictly convex turns (counter-clockwise seen from below-left)
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], pt) <= 0:
            hull.pop()
        hull.append(pt)
    return hull


def edge_polynomial(H: BivarPoly, v0: tuple[int, int], v1: tuple[int, int]) -> tuple[Fraction, UPoly]:
    (A0, B0), (A1, B1) = v0, v1
    M = Fraction(A1 - A0, B0 - B1)
    level = A0 + M * B0
    coeffs = [Fraction(0)] * (B0 + 1)
    for (a, b), c in H.terms.items():
        if a + M * b == level:
            coeffs[b] += c
    return M, upoly(coeffs)


def edge_real_roots(e: EdgeData | UPoly) -> list[tuple[float, int]]:
    p = e.p if isinstance(e, EdgeData) else e
    return [(r.value, r.multiplicity) for r in _roots(p)]


def _roots(p: UPoly) -> tuple[EdgeRoot, ...]:
    out = []
    for r in real_roots(p):
        sign = "0" if r.lo <= 0 <= r.hi else ("+" if r.lo > 0 else "-")
        out.append(EdgeRoot(r.value, r.multiplicity, sign, r.lo, r.hi))
    return tuple(out)


def newton_polyhedron(H: BivarPoly) -> NewtonData:
    verts = newton_vertices(H)
    edges = []
    for v0, v1 in zip(verts, verts[1:]):
        M, p = edge_polynomial(H, v0, v1)
        edges.append(EdgeData((v0, v1), M, p, _roots(p)))
    d = order_at_origin(H)
    return NewtonData(tuple(verts), tuple(edges), d, Fraction(1, 2 * (3 + d)), H)


def vertex_order_bound(nd: NewtonData) -> bool:
    """Check ``d >= min(A + M B, A / M + B)`` on every compact edge."""
    for e in nd.edges:
        A, B = e.endpoints[0]
        if nd.d < min(A + e.M * B, A / e.M + B):
            return False
    return True


def leading_term_along(H: BivarPoly, M: Fraction, c: Fraction) -> tuple[Fraction, Fraction]:
    """Lowest-order term of ``H(x, c x^M)``, as (order in x, coefficient).

    With ``M = p/q`` the curve is parametrised by ``x = s^q, y = c s^p`` so
    everything stays polynomial; the order is reported back in powers of x.
    """
    M = Fraction(M)
    p, q = M.numerator, M.denominator
    acc: dict[int, Fraction] = {}
    for (a, b), coef in H.terms.items():
        e = q * a + p * b
        acc[e] = acc.get(e, Fraction(0)) + coef * Fraction(c) ** b
    nonzero = sorted(e for e, v in acc.items() if v)
    if not nonzero:
        return Fraction(-1), Fraction(0)
    e = nonzero[0]
    return Fraction(e, q), acc[e]


def sector_eps(edge: EdgeData, root: EdgeRoot) -> Fraction:
    """Half-width of the sector around a positive root.

    The largest admissible value keeps every other root of the edge
    polynomial and the axis ``t = 0`` out of ``(c - 2 eps, c + 2 eps)``; we
    halve it and round down to a power of two.
    """
    if not root.active:
        raise ValueError("sector only defined for positive roots")
    gap = root.lo
    for other in edge.real_roots:
        if other is root:
            continue
        gap = min(gap, other.lo - root.hi if other.lo > root.hi else root.lo - other.hi)
    eps_max = gap / 2
    target = eps_max / 2
    e = Fraction(1)
    while e > target:
        e /= 2
    while e * 2 <= target:
        e *= 2
    return e


def reflect(H: BivarPoly, axis: str) -> BivarPoly:
    """``H(-x, y)`` for axis ``x``, ``H(x, -y)`` for ``y``, both for ``xy``."""
    flip_x = "x" in axis
    flip_y = "y" in axis
    return BivarPoly({(a, b): c * (-1 if (flip_x and a % 2) else 1) * (-1 if (flip_y and b % 2) else 1)
                      for (a, b), c in H.terms.items()})


def edge_value(edge: EdgeData, t) -> float:
    return ueval(edge.p, t)
