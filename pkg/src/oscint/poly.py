"""Exact bivariate polynomials with rational coefficients.

Coefficients are kept as :class:`fractions.Fraction` so that Newton data and
degeneracy tests are exact; floating point only enters through evaluation and
the Bernstein range enclosures at the bottom of this module.
"""
from __future__ import annotations

import ast
import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

Exponent = Tuple[int, int]
Number = int | Fraction

DEFAULT_TOL = 1e-6
DEFAULT_BUDGET = 4096


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, float):
        # floats are dyadic rationals; convert exactly
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot use {type(value).__name__} as an exact coefficient")


class BivarPoly:
    """Immutable polynomial in ``x`` and ``y`` over the rationals."""

    __slots__ = ("_terms", "_float_cache")

    def __init__(self, terms: Mapping[Exponent, Number] | None = None):
        clean: Dict[Exponent, Fraction] = {}
        for (a, b), c in (terms or {}).items():
            if a < 0 or b < 0:
                raise ValueError(f"negative exponent {(a, b)}")
            c = _as_fraction(c)
            if c:
                key = (int(a), int(b))
                clean[key] = clean.get(key, Fraction(0)) + c
                if not clean[key]:
                    del clean[key]
        object.__setattr__(self, "_terms", clean)
        object.__setattr__(self, "_float_cache", None)

    def __setattr__(self, name, value):
        raise AttributeError("BivarPoly is immutable")

    # construction helpers
    @classmethod
    def x(cls) -> "BivarPoly":
        return cls({(1, 0): 1})

    @classmethod
    def y(cls) -> "BivarPoly":
        return cls({(0, 1): 1})

    @classmethod
    def const(cls, c: Number) -> "BivarPoly":
        return cls({(0, 0): c})

    @classmethod
    def monomial(cls, a: int, b: int, c: Number = 1) -> "BivarPoly":
        return cls({(a, b): c})

    @classmethod
    def parse(cls, text: str) -> "BivarPoly":
        return parse_poly(text)

    # basic properties
    @property
    def terms(self) -> Dict[Exponent, Fraction]:
        return dict(self._terms)

    @property
    def support(self) -> list[Exponent]:
        return sorted(self._terms)

    @property
    def degree(self) -> int:
        return max((a + b for a, b in self._terms), default=0)

    @property
    def degree_x(self) -> int:
        return max((a for a, _ in self._terms), default=0)

    @property
    def degree_y(self) -> int:
        return max((b for _, b in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def coeff(self, a: int, b: int) -> Fraction:
        return self._terms.get((a, b), Fraction(0))

    # arithmetic
    def __add__(self, other):
        other = _coerce(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, Fraction(0)) + c
        return BivarPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return BivarPoly({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        out: Dict[Exponent, Fraction] = {}
        for (a1, b1), c1 in self._terms.items():
            for (a2, b2), c2 in other._terms.items():
                k = (a1 + a2, b1 + b2)
                out[k] = out.get(k, Fraction(0)) + c1 * c2
        return BivarPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        result = BivarPoly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = BivarPoly.const(other)
        if not isinstance(other, BivarPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __repr__(self):
        return f"BivarPoly({str(self)!r})"

    def __str__(self):
        return format_poly(self)

    # calculus and substitution
    def diff(self, axis: str, times: int = 1) -> "BivarPoly":
        return differentiate(self, axis, times)

    def compose(self, px: "BivarPoly", py: "BivarPoly") -> "BivarPoly":
        """Return ``self(px(u, v), py(u, v))``."""
        px_pows = [BivarPoly.const(1)]
        py_pows = [BivarPoly.const(1)]
        for _ in range(self.degree_x):
            px_pows.append(px_pows[-1] * px)
        for _ in range(self.degree_y):
            py_pows.append(py_pows[-1] * py)
        out = BivarPoly()
        for (a, b), c in self._terms.items():
            out = out + (px_pows[a] * py_pows[b]) * c
        return out

    def swap(self) -> "BivarPoly":
        return BivarPoly({(b, a): c for (a, b), c in self._terms.items()})

    # numerics
    def coeff_array(self) -> np.ndarray:
        """Dense float coefficient table ``A[a, b]`` of ``x^a y^b``."""
        if self._float_cache is None:
            arr = np.zeros((self.degree_x + 1, self.degree_y + 1))
            for (a, b), c in self._terms.items():
                arr[a, b] = float(c)
            arr.setflags(write=False)
            object.__setattr__(self, "_float_cache", arr)
        return self._float_cache

    def __call__(self, x, y):
        return evaluate(self, x, y)


def _coerce(value) -> BivarPoly:
    if isinstance(value, BivarPoly):
        return value
    return BivarPoly.const(_as_fraction(value))


# --------------------------------------------------------------------------
# text format

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Pow, ast.Div)


def parse_poly(text: str) -> BivarPoly:
    """Parse ``c*x^a*y^b`` sums; ``**`` and ``^`` both mean power.

    Parentheses and products of sub-expressions are accepted, and division is
    allowed only by a constant, so ``3/2*x^2`` and ``(x+y)^3/6`` both work.
    """
    src = text.strip().replace("^", "**")
    if not src:
        raise ValueError("empty polynomial")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse polynomial {text!r}: {exc.msg}") from None
    return _walk(tree.body, text)


def _walk(node, text) -> BivarPoly:
    if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
        return BivarPoly.const(node.value)
    if isinstance(node, ast.Name):
        if node.id == "x":
            return BivarPoly.x()
        if node.id == "y":
            return BivarPoly.y()
        raise ValueError(f"unknown variable {node.id!r} in {text!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _walk(node.operand, text)
        return -inner if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
        left = _walk(node.left, text)
        if isinstance(node.op, ast.Pow):
            exp = _walk(node.right, text)
            if exp.degree != 0 or exp.coeff(0, 0).denominator != 1 or exp.coeff(0, 0) < 0:
                raise ValueError(f"exponents must be non-negative integers in {text!r}")
            return left ** int(exp.coeff(0, 0))
        right = _walk(node.right, text)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if right.degree != 0 or right.is_zero():
            raise ValueError(f"division only by a nonzero constant in {text!r}")
        return left * (1 / right.coeff(0, 0))
    raise ValueError(f"unsupported syntax in polynomial {text!r}")


def _format_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_poly(p: BivarPoly) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for (a, b) in sorted(p._terms, key=lambda k: (-(k[0] + k[1]), -k[0])):
        c = p._terms[(a, b)]
        mono = []
        if a:
            mono.append("x" if a == 1 else f"x^{a}")
        if b:
            mono.append("y" if b == 1 else f"y^{b}")
        mag = abs(c)
        if mono and mag == 1:
            body = "*".join(mono)
        else:
            body = "*".join([_format_coeff(mag)] + mono)
        parts.append(("- " if c < 0 else "+ ") + body)
    out = " ".join(parts)
    return out[2:] if out.startswith("+ ") else "-" + out[2:]


# --------------------------------------------------------------------------
# operators

def differentiate(p: BivarPoly, axis: str, times: int = 1) -> BivarPoly:
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    if times < 0:
        raise ValueError("times must be non-negative")
    out = {}
    for (a, b), c in p._terms.items():
        e = a if axis == "x" else b
        if e < times:
            continue
        factor = math.perm(e, times)
        key = (a - times, b) if axis == "x" else (a, b - times)
        out[key] = c * factor
    return BivarPoly(out)


def convolution_hessian(S: BivarPoly) -> BivarPoly:
    """``H = d_x d_y (d_x - d_y) S``; vanishes exactly on p(x)+q(y)+r(x+y)."""
    sxy = differentiate(differentiate(S, "x"), "y")
    return differentiate(sxy, "x") - differentiate(sxy, "y")


def is_degenerate(S: BivarPoly) -> bool:
    return convolution_hessian(S).is_zero()


def evaluate(p: BivarPoly, x, y):
    """Numerical value; Horner in ``y`` inside Horner in ``x``."""
    A = p.coeff_array()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if p.is_zero():
        return np.zeros(np.broadcast(x, y).shape) if (x.ndim or y.ndim) else 0.0
    out = 0.0
    for a in range(A.shape[0] - 1, -1, -1):
        row = A[a]
        inner = 0.0
        for b in range(row.shape[0] - 1, -1, -1):
            inner = inner * y + row[b]
        out = out * x + inner
    if np.ndim(out) == 0:
        return float(out)
    return out


# --------------------------------------------------------------------------
# rectangles and Bernstein enclosures

@dataclass(frozen=True)
class Rect:
    x_lo: Fraction
    x_hi: Fraction
    y_lo: Fraction
    y_hi: Fraction

    def __post_init__(self):
        for name in ("x_lo", "x_hi", "y_lo", "y_hi"):
            object.__setattr__(self, name, _as_fraction(getattr(self, name)))
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self) -> Fraction:
        return self.x_hi - self.x_lo

    @property
    def height(self) -> Fraction:
        return self.y_hi - self.y_lo

    def quarters(self) -> list["Rect"]:
        xm = (self.x_lo + self.x_hi) / 2
        ym = (self.y_lo + self.y_hi) / 2
        return [Rect(self.x_lo, xm, self.y_lo, ym), Rect(xm, self.x_hi, self.y_lo, ym),
                Rect(self.x_lo, xm, ym, self.y_hi), Rect(xm, self.x_hi, ym, self.y_hi)]

    def as_floats(self) -> tuple[float, float, float, float]:
        return float(self.x_lo), float(self.x_hi), float(self.y_lo), float(self.y_hi)


class EnclosureBudgetError(RuntimeError):
    """Subdivision budget ran out; ``best`` holds the enclosure reached."""

    def __init__(self, message: str, best: tuple[float, float]):
        super().__init__(message)
        self.best = best


def _binom_row_ratio(n: int) -> np.ndarray:
    # L[i, k] = C(i, k) / C(n, k) for k <= i
    L = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        for k in range(i + 1):
            L[i, k] = math.comb(i, k) / math.comb(n, k)
    return L


def _exact_bernstein(p: BivarPoly, r: Rect) -> list[list[Fraction]]:
    """Tensor Bernstein coefficients of ``p`` on ``r``, computed exactly."""
    nx, ny = p.degree_x, p.degree_y
    # shifted/scaled power coefficients of p(x_lo + wx s, y_lo + wy t)
    a = [[Fraction(0)] * (ny + 1) for _ in range(nx + 1)]
    for (i, j), c in p._terms.items():
        for k in range(i + 1):
            cx = c * math.comb(i, k) * r.x_lo ** (i - k) * r.width ** k
            for l in range(j + 1):
                a[k][l] += cx * math.comb(j, l) * r.y_lo ** (j - l) * r.height ** l
    out = [[Fraction(0)] * (ny + 1) for _ in range(nx + 1)]
    for i in range(nx + 1):
        for j in range(ny + 1):
            s = Fraction(0)
            for k in range(i + 1):
                ck = Fraction(math.comb(i, k), math.comb(nx, k))
                for l in range(j + 1):
                    if a[k][l]:
                        s += ck * Fraction(math.comb(j, l), math.comb(ny, l)) * a[k][l]
            out[i][j] = s
    return out


def _round_down(q: Fraction) -> float:
    f = float(q)
    return f if Fraction(f) <= q else float(np.nextafter(f, -np.inf))


def _round_up(q: Fraction) -> float:
    f = float(q)
    return f if Fraction(f) >= q else float(np.nextafter(f, np.inf))


def _casteljau_split(B: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    B = np.moveaxis(B, axis, 0)
    n = B.shape[0] - 1
    left = np.empty_like(B)
    right = np.empty_like(B)
    work = B.copy()
    left[0] = work[0]
    right[n] = work[n]
    for r in range(1, n + 1):
        work[: n - r + 1] = 0.5 * (work[: n - r + 1] + work[1: n - r + 2])
        left[r] = work[0]
        right[n - r] = work[n - r]
    return np.moveaxis(left, 0, axis), np.moveaxis(right, 0, axis)


def _bisect_coeffs(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # split across the axis along which the coefficients vary most, so that
    # polynomials flat in one variable do not multiply boxes needlessly
    spread = [float(np.abs(np.diff(B, axis=k)).max()) if B.shape[k] > 1 else -1.0 for k in (0, 1)]
    return _casteljau_split(B, 0 if spread[0] >= spread[1] else 1)


def range_on_rect(p: BivarPoly, r: Rect, tol: float = DEFAULT_TOL,
                  budget: int = DEFAULT_BUDGET) -> tuple[float, float]:
    """Guaranteed enclosure ``lower <= p <= upper`` on ``r``.

    Both ends are refined by Bernstein subdivision until they are within
    ``tol * max(1, |end|)`` of a value actually attained (a box corner).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if p.degree == 0:
        c = float(p.coeff(0, 0))
        return c, c
    exact = _exact_bernstein(p, r)
    flat = [c for row in exact for c in row]
    ex_lo, ex_hi = min(flat), max(flat)
    ex_corners = (exact[0][0], exact[-1][0], exact[0][-1], exact[-1][-1])
    up0, lo0 = _round_up(ex_hi), _round_down(ex_lo)
    # first try: exact root coefficients, attained values are the corners
    if (up0 - float(max(ex_corners)) <= tol * max(1.0, abs(up0))
            and float(min(ex_corners)) - lo0 <= tol * max(1.0, abs(lo0))):
        return lo0, up0
    root = np.array([[float(c) for c in row] for row in exact])
    scale = float(np.abs(root).max())
    # de Casteljau steps are convex combinations: error grows at most linearly in depth
    pad_unit = 4 * np.finfo(float).eps * scale

    def corners(B):
        return (B[0, 0], B[-1, 0], B[0, -1], B[-1, -1])

    # heaps keyed by the bound being refined; entries (key, id, coeffs, depth)
    counter = 0
    hi_heap = [(-root.max(), counter, root, 0)]
    lo_heap = [(root.min(), counter, root, 0)]
    attained_hi = max(corners(root))
    attained_lo = min(corners(root))
    boxes = 1

    def padded(value, depth, sign):
        return value + sign * pad_unit * (depth + 1)

    while True:
        top_hi = -hi_heap[0][0]
        top_lo = lo_heap[0][0]
        upper = padded(top_hi, hi_heap[0][3], +1)
        lower = padded(top_lo, lo_heap[0][3], -1)
        gap_hi = upper - attained_hi
        gap_lo = attained_lo - lower
        ok_hi = gap_hi <= tol * max(1.0, abs(upper))
        ok_lo = gap_lo <= tol * max(1.0, abs(lower))
        if ok_hi and ok_lo:
            return float(np.nextafter(lower, -np.inf)), float(np.nextafter(upper, np.inf))
        if boxes + 2 > budget:
            raise EnclosureBudgetError(
                f"range_on_rect: subdivision budget {budget} exceeded",
                (float(lower), float(upper)))
        if not ok_hi:
            _, _, B, depth = heapq.heappop(hi_heap)
        else:
            _, _, B, depth = heapq.heappop(lo_heap)
        for child in _bisect_coeffs(B):
            counter += 1
            boxes += 1
            attained_hi = max(attained_hi, *corners(child))
            attained_lo = min(attained_lo, *corners(child))
            heapq.heappush(hi_heap, (-child.max(), counter, child, depth + 1))
            heapq.heappush(lo_heap, (child.min(), counter, child, depth + 1))
        # stale entries of the split parent stay in the other heap; they only
        # make that bound looser, never wrong


# --------------------------------------------------------------------------
# batched float enclosures (used by the stopping-time machinery)

_TABLES: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _tables(deg: int):
    if deg not in _TABLES:
        comb = np.array([[math.comb(i, k) for k in range(deg + 1)] for i in range(deg + 1)], dtype=float)
        _TABLES[deg] = (comb, _binom_row_ratio(deg))
    return _TABLES[deg]


def _pad(A: np.ndarray, rects: np.ndarray) -> np.ndarray:
    # rounding bound: a multiple of eps times |A| evaluated at the far corner
    ax = np.maximum(np.abs(rects[:, 0]), np.abs(rects[:, 1]))
    ay = np.maximum(np.abs(rects[:, 2]), np.abs(rects[:, 3]))
    mag = _eval_array(np.abs(A), ax, ay)
    deg = A.shape[0] + A.shape[1]
    return 4 * deg * deg * np.finfo(float).eps * mag


def enclose_batch(A: np.ndarray, rects: np.ndarray, sub: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Padded (lower, upper) enclosures of ``A`` on each rectangle.

    ``sub`` splits every rectangle into ``sub x sub`` cells before taking
    Bernstein bounds, which tightens them at ``sub^2`` times the cost.
    """
    lo, hi, _, _ = enclose_batch_full(A, rects, sub)
    return lo, hi


def enclose_batch_full(A: np.ndarray, rects: np.ndarray, sub: int = 1):
    """Like :func:`enclose_batch`, also returning attained min and max at cell corners."""
    from .kernels import bernstein_bounds

    rects = np.ascontiguousarray(np.atleast_2d(np.asarray(rects, dtype=float)))
    N = rects.shape[0]
    A = np.ascontiguousarray(A, dtype=float)
    if N == 0:
        z = np.zeros(0)
        return z, z, z, z
    if A.size == 1:
        c = np.full(N, float(A.ravel()[0]))
        return c, c, c, c
    deg = max(A.shape) - 1
    comb, _ = _tables(deg)
    Lx = _binom_row_ratio(A.shape[0] - 1)
    Ly = _binom_row_ratio(A.shape[1] - 1)
    lo, hi, amin, amax = bernstein_bounds(A, rects, int(sub), comb, Lx, Ly)
    pad = _pad(A, rects)
    return lo - pad, hi + pad, amin - pad, amax + pad


def abs_sup_batch(A: np.ndarray, rects: np.ndarray, sub: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Bounds ``(lo, hi)`` on ``sup |p|`` over each rectangle.

    ``hi`` comes from the Bernstein enclosure, ``lo`` from values attained
    at cell corners.
    """
    lo, hi, amin, amax = enclose_batch_full(A, rects, sub)
    upper = np.maximum(np.abs(lo), np.abs(hi))
    attained = np.maximum(np.maximum(amax, -amin), 0.0)
    return np.minimum(attained, upper), upper


def abs_inf_batch(A: np.ndarray, rects: np.ndarray, sub: int = 1) -> np.ndarray:
    """Lower bound on ``inf |p|``; zero when the enclosure straddles 0."""
    lo, hi = enclose_batch(A, rects, sub)
    return np.where(lo > 0, lo, np.where(hi < 0, -hi, 0.0))


def _eval_array(A: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast(x, y).shape)
    for a in range(A.shape[0] - 1, -1, -1):
        inner = np.zeros_like(out)
        for b in range(A.shape[1] - 1, -1, -1):
            inner = inner * y + A[a, b]
        out = out * x + inner
    return out


def iter_terms(p: BivarPoly) -> Iterable[tuple[int, int, Fraction]]:
    for (a, b), c in sorted(p._terms.items()):
        yield a, b, c
