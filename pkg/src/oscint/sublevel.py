"""Algebraic domains in the unit square, their curved-trapezoid decomposition,
and the trilinear sublevel-set operator.

Critical abscissae come from exact algebra (factorisation and resultants in
sympy, real-root isolation by Sturm sequences); the boundary curves between
them are traced numerically.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np
import sympy as sp

from . import kernels
from .poly import BivarPoly, EnclosureBudgetError, Rect, convolution_hessian, differentiate, parse_poly, range_on_rect
from .trapezoid import Boundary, CurvedTrapezoid
from .trilinear import NormEstimate, fit_slope, maximize_form
from .upoly import real_roots, upoly

_X, _Y = sp.symbols("x y")
PAIR_TOL = 1e-8
TABLE_POINTS = 257
MIN_SLAB = 1e-10
ROOT_TOL = Fraction(1, 2**60)


# --------------------------------------------------------------------------
# domains

@dataclass(frozen=True)
class Inequality:
    """``P >= level``."""

    P: BivarPoly
    level: Fraction

    def __post_init__(self):
        if self.P.is_zero():
            raise ValueError("inequality polynomial must be nonzero")
        object.__setattr__(self, "level", Fraction(self.level))

    @property
    def Q(self) -> BivarPoly:
        return self.P - self.level

    def holds(self, x, y) -> np.ndarray:
        return np.asarray(self.P(x, y)) >= float(self.level)

    def holds_exact(self, x: Fraction, y: Fraction) -> bool:
        return self.Q(Fraction(x), Fraction(y)) >= 0

    def __str__(self):
        return f"{self.P} >= {self.level}"


@dataclass(frozen=True)
class AlgebraicDomain:
    """Union of conjunctions of polynomial inequalities, intersected with ``[0, 1]^2``."""

    pieces: tuple[tuple[Inequality, ...], ...] = ((),)

    @classmethod
    def whole(cls) -> "AlgebraicDomain":
        return cls(((),))

    @classmethod
    def from_inequalities(cls, ineqs: Iterable) -> "AlgebraicDomain":
        return cls((tuple(_as_inequality(q) for q in ineqs),))

    @classmethod
    def union(cls, *conjunctions: Iterable) -> "AlgebraicDomain":
        return cls(tuple(tuple(_as_inequality(q) for q in c) for c in conjunctions))

    @classmethod
    def parse(cls, text: str) -> "AlgebraicDomain":
        """One inequality per line (``>=`` or ``<=``); a line ``or`` starts a new piece."""
        pieces: list[list[Inequality]] = [[]]
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.lower() == "or":
                pieces.append([])
                continue
            pieces[-1].append(parse_inequality(line))
        return cls(tuple(tuple(p) for p in pieces))

    @property
    def inequalities(self) -> list[Inequality]:
        return [q for piece in self.pieces for q in piece]

    @property
    def type_params(self) -> dict:
        return {"r": max((len(p) for p in self.pieces), default=0),
                "n": max((q.P.degree for q in self.inequalities), default=0),
                "omega": len(self.pieces)}

    def contains(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        box = (x >= 0) & (x <= 1) & (y >= 0) & (y <= 1)
        out = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for piece in self.pieces:
            ok = np.ones_like(out)
            for q in piece:
                ok &= q.holds(x, y)
            out |= ok
        return out & box

    def contains_exact(self, x: Fraction, y: Fraction) -> bool:
        if not (0 <= x <= 1 and 0 <= y <= 1):
            return False
        return any(all(q.holds_exact(x, y) for q in piece) for piece in self.pieces)

    def intersect(self, other: "AlgebraicDomain") -> "AlgebraicDomain":
        return AlgebraicDomain(tuple(a + b for a in self.pieces for b in other.pieces))


def _as_inequality(q) -> Inequality:
    if isinstance(q, Inequality):
        return q
    if isinstance(q, str):
        return parse_inequality(q)
    P, level = q
    return Inequality(P if isinstance(P, BivarPoly) else parse_poly(P), Fraction(level))


def parse_inequality(text: str) -> Inequality:
    for op in (">=", "<="):
        if op in text:
            lhs, rhs = text.split(op, 1)
            diff = parse_poly(lhs) - parse_poly(rhs)
            if op == "<=":
                diff = -diff
            level = -diff.coeff(0, 0)
            return Inequality(diff + level, level)
    raise ValueError(f"expected '>=' or '<=' in {text!r}")


# --------------------------------------------------------------------------
# exact algebra bridge

def to_sympy(p: BivarPoly) -> sp.Poly:
    expr = sum((sp.Rational(c.numerator, c.denominator) * _X ** a * _Y ** b for (a, b), c in p.terms.items()),
               sp.Integer(0))
    return sp.Poly(expr, _X, _Y, domain="QQ")


def from_sympy(P: sp.Poly) -> BivarPoly:
    P = sp.Poly(P, _X, _Y, domain="QQ")
    return BivarPoly({(a, b): Fraction(int(c.p), int(c.q)) for (a, b), c in P.terms()})


def _univariate_roots(P: sp.Poly, var, lo: float = -math.inf, hi: float = math.inf) -> list[float]:
    U = sp.Poly(P.as_expr(), var, domain="QQ")
    coeffs = [Fraction(int(c.p), int(c.q)) for c in reversed(U.all_coeffs())]
    p = upoly(coeffs)
    if len(p) <= 1:
        return []
    return [r.value for r in real_roots(p, ROOT_TOL) if lo - PAIR_TOL <= r.value <= hi + PAIR_TOL]


def _primitive_key(P: sp.Poly) -> tuple:
    P = sp.Poly(P, _X, _Y, domain="QQ").monic()
    return tuple(sorted((m, (int(c.p), int(c.q))) for m, c in P.terms()))


def squarefree_factors(Q: BivarPoly) -> list[BivarPoly]:
    """Distinct irreducible factors over the rationals (multiplicities dropped)."""
    _, factors = sp.factor_list(to_sympy(Q).as_expr(), _X, _Y)
    out = []
    for f, _mult in factors:
        P = sp.Poly(f, _X, _Y, domain="QQ")
        if P.total_degree() > 0:
            out.append(from_sympy(P.monic()))
    return out


# --------------------------------------------------------------------------
# critical sets

@dataclass
class CriticalSet:
    factors: list[BivarPoly]
    gamma1: list[tuple[str, float]]
    gamma2: list[tuple[float, float]]
    gamma3: list[tuple[float, float]]
    L: list[tuple[str, float]]
    budget: dict = field(default_factory=dict)
    mode: str = "exact"

    @property
    def vertical_lines(self) -> list[float]:
        return sorted(v for axis, v in self.L if axis == "x")

    @property
    def horizontal_lines(self) -> list[float]:
        return sorted(v for axis, v in self.L if axis == "y")



def _common_zeros(P: sp.Poly, G: sp.Poly) -> list[tuple[float, float]]:
    """Real common zeros of two coprime polynomials inside the closed unit square."""
    rx = sp.Poly(sp.resultant(P.as_expr(), G.as_expr(), _Y), _X, domain="QQ")
    ry = sp.Poly(sp.resultant(P.as_expr(), G.as_expr(), _X), _Y, domain="QQ")
    xs = _univariate_roots(rx, _X, 0.0, 1.0) if not rx.is_zero else []
    ys = _univariate_roots(ry, _Y, 0.0, 1.0) if not ry.is_zero else []
    Pf, Gf = from_sympy(P), from_sympy(G)
    scale_p = 1.0 + sum(abs(float(c)) for c in Pf.terms.values())
    scale_g = 1.0 + sum(abs(float(c)) for c in Gf.terms.values())
    out = []
    for x in xs:
        for y in ys:
            if abs(Pf(x, y)) <= PAIR_TOL * scale_p and abs(Gf(x, y)) <= PAIR_TOL * scale_g:
                out.append((_snap(x), _snap(y)))
    return out


def _snap(v: float) -> float:
    # clamp roots that sit on the square's edges up to isolation tolerance
    if abs(v) <= PAIR_TOL:
        return 0.0
    if abs(v - 1) <= PAIR_TOL:
        return 1.0
    return v


def _dedupe(values: Iterable[float], tol: float = 1e-10) -> list[float]:
    out: list[float] = []
    for v in sorted(values):
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


def critical_sets(domain: AlgebraicDomain) -> CriticalSet:
    """Factor every ``P_k - lambda_k`` and collect the critical lines and points.

    Levels are rationals (floats are converted exactly), so the algebra is
    always exact.
    """
    keyed: dict[tuple, BivarPoly] = {}
    for q in domain.inequalities:
        for f in squarefree_factors(q.Q):
            keyed.setdefault(_primitive_key(to_sympy(f)), f)
    factors = list(keyed.values())
    gamma1: list[tuple[str, float]] = []
    gamma2: list[tuple[float, float]] = []
    gamma3: list[tuple[float, float]] = []
    boundary_x: list[float] = []
    boundary_y: list[float] = []
    for f in factors:
        P = to_sympy(f)
        dx, dy = P.diff(_X), P.diff(_Y)
        if dx.is_zero:
            gamma1 += [("y", _snap(v)) for v in _univariate_roots(P, _Y, 0.0, 1.0)]
            continue
        if dy.is_zero:
            gamma1 += [("x", _snap(v)) for v in _univariate_roots(P, _X, 0.0, 1.0)]
            continue
        for G in (dx, dy):
            gamma2 += _common_zeros(P, G)
        for edge in (0, 1):
            boundary_x += _univariate_roots(sp.Poly(P.as_expr().subs(_Y, edge), _X), _X, 0.0, 1.0)
            boundary_y += _univariate_roots(sp.Poly(P.as_expr().subs(_X, edge), _Y), _Y, 0.0, 1.0)
    for f, g in itertools.combinations(factors, 2):
        gamma3 += _common_zeros(to_sympy(f), to_sympy(g))
    verticals = [v for a, v in gamma1 if a == "x"] + [p[0] for p in gamma2 + gamma3] + boundary_x
    horizontals = [v for a, v in gamma1 if a == "y"] + [p[1] for p in gamma2 + gamma3] + boundary_y
    L = [("x", _snap(v)) for v in _dedupe(verticals) if 0 <= _snap(v) <= 1]
    L += [("y", _snap(v)) for v in _dedupe(horizontals) if 0 <= _snap(v) <= 1]
    degrees = [f.degree for f in factors]
    budget = {
        "gamma1": sum(degrees),
        "gamma2": sum(2 * n * (n - 1) for n in degrees),
        "gamma3": sum(a * b for a, b in itertools.combinations(degrees, 2)),
        "boundary": 4 * sum(degrees),
    }
    budget["lines"] = 2 * sum(budget.values()) + 4
    budget["trapezoids"] = (budget["lines"] + 1) * (sum(f.degree_y for f in factors) + 1)
    return CriticalSet(factors, sorted(set(gamma1)), sorted(set(gamma2)), sorted(set(gamma3)), sorted(set(L)),
                       budget, "exact")


# --------------------------------------------------------------------------
# branch tracing

class TraceError(RuntimeError):
    pass


def _y_coeffs(P: BivarPoly, x: float) -> np.ndarray:
    # coefficients in y (highest first) of P(x, .)
    A = P.coeff_array()
    powers = x ** np.arange(A.shape[0])
    return (powers @ A)[::-1]


def _roots_in_unit(P: BivarPoly, x: float) -> list[float]:
    c = np.trim_zeros(_y_coeffs(P, x), "f")
    if c.size <= 1:
        return []
    r = np.roots(c)
    real = r[np.abs(r.imag) <= 1e-9 * (1 + np.abs(r.real))].real
    out = sorted(_newton_polish(P, x, v) for v in real if -1e-9 <= v <= 1 + 1e-9)
    return out


def _newton_polish(P: BivarPoly, x: float, y: float, iters: int = 20) -> float:
    Py = differentiate(P, "y")
    for _ in range(iters):
        d = Py(x, y)
        if d == 0:
            break
        step = P(x, y) / d
        y -= step
        if abs(step) <= 1e-15 * (1 + abs(y)):
            break
    return float(y)


def _cluster(a: float, b: float, m: int) -> np.ndarray:
    # Chebyshev-Lobatto spacing, dense near slab edges where branches may turn vertical
    t = 0.5 * (1 - np.cos(np.linspace(0.0, math.pi, m)))
    xs = a + (b - a) * t
    xs[0], xs[-1] = a, b
    return xs


def _trace(P: BivarPoly, xs: np.ndarray, start: int, y0: float, others: Sequence[float]) -> np.ndarray:
    """Predictor-corrector continuation of the branch through ``(xs[start], y0)``."""
    Px, Py = differentiate(P, "x"), differentiate(P, "y")
    ys = np.empty_like(xs)
    ys[start] = y0
    sep = min((abs(y0 - o) for o in others), default=1.0)
    for direction in (1, -1):
        i = start
        while 0 <= i + direction < len(xs):
            j = i + direction
            x, y = xs[i], ys[i]
            dy = Py(x, y)
            slope = -Px(x, y) / dy if dy != 0 else 0.0
            guess = y + slope * (xs[j] - x)
            edge = j in (0, len(xs) - 1)
            if edge:
                # at a slab edge the branch may be vertical: take the nearest exact root
                cands = _roots_in_unit(P, xs[j])
                if not cands:
                    cands = [float(np.clip(guess, 0.0, 1.0))]
                ys[j] = min(cands, key=lambda c: abs(c - ys[i]))
            else:
                yj = guess
                ok = False
                for _ in range(30):
                    d = Py(xs[j], yj)
                    if d == 0:
                        break
                    step = P(xs[j], yj) / d
                    yj -= step
                    if abs(step) <= 1e-14 * (1 + abs(yj)):
                        ok = True
                        break
                if not ok or abs(yj - ys[i]) > 0.5 * sep + abs(xs[j] - x) * (abs(slope) + 1):
                    raise TraceError(f"continuation failed at x = {xs[j]:.6g}")
                ys[j] = yj
            i = j
    return ys


def _monotone_table(ys: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    d = np.diff(ys)
    up, down = d[d > 0].sum(), -d[d < 0].sum()
    if up >= down:
        bad = -d[d < 0]
        fixed = np.maximum.accumulate(ys)
    else:
        bad = d[d > 0]
        fixed = np.minimum.accumulate(ys)
    if bad.size and bad.max() > tol * (1 + np.abs(ys).max()):
        raise TraceError("traced boundary is not monotone on its slab")
    # rounding-level ripples only
    return fixed


@dataclass
class _Branch:
    ys: np.ndarray
    source: BivarPoly
    mid: float


def _slab_branches(factors: Sequence[BivarPoly], a: float, b: float) -> tuple[np.ndarray, list[_Branch]]:
    xs = _cluster(a, b, TABLE_POINTS)
    start = TABLE_POINTS // 2
    xm = xs[start]
    branches: list[_Branch] = []
    for f in factors:
        if f.degree_y == 0:
            continue
        if f.degree_x == 0:
            for v in _roots_in_unit(f, xm):
                if 0 < v < 1:
                    branches.append(_Branch(np.full_like(xs, v), f, v))
            continue
        roots = [v for v in _roots_in_unit(f, xm) if 0 < v < 1]
        for k, v in enumerate(roots):
            ys = _trace(f, xs, start, v, roots[:k] + roots[k + 1:])
            branches.append(_Branch(np.clip(_monotone_table(ys), 0.0, 1.0), f, v))
    branches.sort(key=lambda br: br.mid)
    return xs, branches


def decompose_domain(domain: AlgebraicDomain, crit: CriticalSet | None = None) -> list[CurvedTrapezoid]:
    """Curved trapezoids covering the domain up to the zero sets and the critical lines."""
    crit = crit if crit is not None else critical_sets(domain)
    cuts = _dedupe([0.0, 1.0] + [v for v in crit.vertical_lines if 0 < v < 1])
    out: list[CurvedTrapezoid] = []
    stack = list(zip(cuts, cuts[1:]))[::-1]
    while stack:
        a, b = stack.pop()
        try:
            xs, branches = _slab_branches(crit.factors, a, b)
        except TraceError:
            if b - a < MIN_SLAB:
                raise
            m = 0.5 * (a + b)
            stack += [(m, b), (a, m)]
            continue
        xm = xs[TABLE_POINTS // 2]
        walls = [Boundary(xs, np.zeros_like(xs))]
        walls += [Boundary(xs, br.ys, br.source, k) for k, br in enumerate(branches)]
        walls += [Boundary(xs, np.ones_like(xs))]
        for k, (lo, hi) in enumerate(zip(walls, walls[1:])):
            wy = 0.5 * (float(lo(xm)) + float(hi(xm)))
            if hi(xm) - lo(xm) <= 0:
                continue
            if domain.contains_exact(Fraction(xm), Fraction(wy)):
                out.append(CurvedTrapezoid(float(a), float(b), lo, hi, tags={"slab": (a, b), "band": k}))
    return out


def union_area(traps: Sequence[CurvedTrapezoid]) -> float:
    return float(sum(t.area() for t in traps))


def rejection_area(domain: AlgebraicDomain, samples: int, rng: np.random.Generator) -> float:
    pts = rng.uniform(0.0, 1.0, (samples, 2))
    return float(domain.contains(pts[:, 0], pts[:, 1]).mean())


# --------------------------------------------------------------------------
# sublevel-set operator

def unit_grid(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def sublevel_kernel(H: BivarPoly, domain: AlgebraicDomain, mu: float, n: int) -> np.ndarray:
    x = unit_grid(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return ((np.abs(H(X, Y)) <= mu) & domain.contains(X, Y)).astype(float)


def _nonneg_value(K: np.ndarray, h: float, vecs) -> float:
    f1, f2, f3 = (np.abs(v).astype(np.complex128) for v in vecs)
    f1, f2, f3 = (v / np.linalg.norm(v) for v in (f1, f2, f3))
    return math.sqrt(h) * abs(kernels.form_value(np.ascontiguousarray(K, dtype=np.complex128), f1, f2, f3))


def sublevel_norm(H: BivarPoly, domain: AlgebraicDomain, mu: float, n: int = 256, restarts: int = 2,
                  iters: int = 200, seed: int = 0, starts: Sequence = (), details: bool = False):
    """Discrete norm of ``(f, g, h) -> sum 1{|H| <= mu} 1_D f(x) g(y) h(x + y)``."""
    if n < 64:
        raise ValueError("n must be at least 64")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    K = sublevel_kernel(H, domain, mu, n)
    h = 1.0 / n
    if not K.any():
        return NormEstimate(0.0, (np.zeros(n), np.zeros(n), np.zeros(2 * n - 1)), [], []) if details else 0.0
    ones = (np.ones(n), np.ones(n), np.ones(2 * n - 1))
    est = maximize_form(K, h, restarts, iters, np.random.default_rng(seed), [ones, *starts])
    # a nonnegative kernel is maximised on nonnegative vectors
    for s in starts:
        warm = _nonneg_value(K, h, s)
        if warm > est.value:
            est = NormEstimate(warm, tuple(np.abs(v) for v in s), est.histories, est.iterations)
    return est if details else est.value


def monomial_sublevel_bound(alpha: tuple[int, int], mu: float) -> float:
    """Explicit dyadic upper bound for the norm on ``{x^a y^b <= mu}`` in the unit square.

    Pieces ``{2^k <= x^a < 2^(k+1), 2^l <= y^b < 2^(l+1)}`` obey the
    Cauchy-Schwarz bound ``min(|I|, |J|)^(1/2)``; each shell ``D_j`` is handled
    by almost orthogonality with overlap constant 3 and the shells are summed.
    """
    a, b = alpha
    if a < 0 or b < 0 or (a == 0 and b == 0):
        raise ValueError("alpha must be a nonzero exponent pair")
    if mu <= 0:
        return 0.0
    jmu = math.floor(math.log2(mu))

    def width(k: int, e: int) -> float:
        # length of {t in [0, 1]: 2^k <= t^e < 2^(k+1)}
        return max(min(2.0 ** ((k + 1) / e), 1.0) - 2.0 ** (k / e), 0.0)

    total = 0.0
    j = jmu
    while True:
        if a == 0 or b == 0:
            term = math.sqrt(width(j, a or b))
        else:
            best = 0.0
            for k in range(j - 1, 1):
                for l in (j - 1 - k, j - k, j + 1 - k):
                    if l <= 0:
                        best = max(best, min(width(k, a), width(l, b)))
            term = 3.0 * math.sqrt(best)
        total += term
        if j < jmu - 8 and term <= 1e-17 * total:
            break
        j -= 1
    return total


def check_conditions(H: BivarPoly, conditions: Sequence[tuple[int, int]], traps: Sequence[CurvedTrapezoid],
                     strips: Sequence[int] = (8, 32, 128)) -> float:
    """Verify ``|d^alpha H| >= 1`` on every trapezoid; return the smallest certified lower bound."""
    worst = math.inf
    for alpha in conditions:
        D = differentiate(differentiate(H, "x", alpha[0]), "y", alpha[1])
        for t in traps:
            for m in strips:
                low, bad = _cover_min(D, t.cover_rects(m))
                if low >= 1:
                    break
            else:
                raise ValueError(f"condition |d^{tuple(alpha)} H| >= 1 fails on rectangle "
                                 f"{tuple(round(v, 6) for v in bad.as_floats())}")
            worst = min(worst, low)
    return worst


def _cover_min(D: BivarPoly, rects: Sequence[Rect]) -> tuple[float, Optional[Rect]]:
    low, where = math.inf, None
    for r in rects:
        if D.is_zero():
            return 0.0, r
        try:
            lo, hi = range_on_rect(D, r)
        except EnclosureBudgetError as exc:
            lo, hi = exc.best
        m = lo if lo > 0 else (-hi if hi < 0 else 0.0)
        if m < low:
            low, where = m, r
    return low, where


@dataclass
class SublevelSweep:
    mus: list[float]
    norms: list[float]
    fitted_exponent: float
    theory_exponent: Fraction
    d: int
    condition_floor: float
    bounds: Optional[list[float]] = None


def sublevel_sweep(H: BivarPoly, domain: AlgebraicDomain, mus: Sequence[float],
                   conditions: Sequence[tuple[int, int]], n: int = 1024, restarts: int = 2, iters: int = 200,
                   seed: int = 0) -> SublevelSweep:
    """Norms over increasing ``mu`` with warm starts, and their log-log slope.

    Each run starts from the previous optimiser (in absolute value), so on a
    fixed grid the reported norms cannot decrease with ``mu``.
    """
    mus = [float(m) for m in mus]
    if len(mus) < 2 or any(m <= 0 for m in mus) or mus != sorted(mus):
        raise ValueError("mus must be at least two positive values in increasing order")
    if not conditions:
        raise ValueError("need at least one derivative condition")
    floor = check_conditions(H, conditions, decompose_domain(domain))
    d = min(a + b for a, b in conditions)
    norms, starts = [], []
    for i, mu in enumerate(mus):
        est = sublevel_norm(H, domain, mu, n, restarts, iters, seed + i, starts, details=True)
        norms.append(est.value)
        starts = [tuple(np.abs(v) for v in est.vectors)] if est.value > 0 else []
    positive = [(m, v) for m, v in zip(mus, norms) if v > 0]
    slope = fit_slope([m for m, _ in positive], [v for _, v in positive], drop_ends=False) \
        if len(positive) >= 2 else math.nan
    bounds = None
    if len(H.terms) == 1:
        (alpha, c), = H.terms.items()
        bounds = [monomial_sublevel_bound(alpha, m / abs(float(c))) for m in mus]
    return SublevelSweep(mus, norms, slope, Fraction(1, 2 * d), d, floor, bounds)


# --------------------------------------------------------------------------
# shell-localised oscillatory form

def shell_profile(t):
    """Smooth bump supported in ``[1/2, 2]`` with value 1 at ``t = 1``."""
    t = np.asarray(t, dtype=float)
    s = np.log2(np.where(t > 0, t, 1.0))
    inside = (t > 0) & (np.abs(s) < 1)
    out = np.zeros_like(t)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def shell_kernel(S: BivarPoly, lam: float, mu: float, n: int) -> np.ndarray:
    x = unit_grid(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    H = convolution_hessian(S)
    Hv = H(X, Y) if not H.is_zero() else np.zeros_like(X)
    return np.exp(1j * lam * S(X, Y)) * shell_profile(Hv / mu)


def shell_norm(S: BivarPoly, lam: float, mu: float, n: int = 1024, restarts: int = 4, iters: int = 200,
               seed: int = 0) -> float:
    """Norm of the oscillatory form on the unit square with ``phi(H / mu)`` inserted."""
    if mu == 0:
        raise ValueError("mu must be nonzero")
    K = shell_kernel(S, lam, mu, n)
    return maximize_form(K, 1.0 / n, restarts, iters, np.random.default_rng(seed)).value


@dataclass
class ShellSweep:
    lambdas: list[float]
    norms: list[float]
    scaled: list[float]
    spread: float
    slope: float


def shell_sweep(S: BivarPoly, mu: float, lambdas: Sequence[float], n: int = 1024, restarts: int = 4,
                iters: int = 200, seed: int = 0) -> ShellSweep:
    """``norm * |lam mu|^(1/6)`` across ``lambdas``; ``spread`` is its max/min ratio."""
    lambdas = [float(v) for v in lambdas]
    if not lambdas:
        raise ValueError("need at least one lambda")
    norms = [shell_norm(S, lam, mu, n, restarts, iters, seed + i) for i, lam in enumerate(lambdas)]
    scaled = [v * abs(lam * mu) ** (1 / 6) for v, lam in zip(norms, lambdas)]
    spread = max(scaled) / min(scaled) if min(scaled) > 0 else math.inf
    slope = fit_slope(lambdas, norms, drop_ends=False) if len(lambdas) >= 2 else math.nan
    return ShellSweep(lambdas, norms, scaled, spread, slope)
