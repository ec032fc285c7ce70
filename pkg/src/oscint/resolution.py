"""Stopping-time resolution of ``H`` near a root direction ``y ~ c x^M``.

Squares are kept as integer arrays ``(e, ix, iy)``: side ``2^e`` and lower
corner ``(ix 2^e, iy 2^e)``. Every coordinate is then an exact dyadic
float, and the geometric tests against the curved sector fall back to exact
rational arithmetic only when floating point cannot decide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .newton import EdgeData, EdgeRoot, newton_polyhedron, sector_eps
from .poly import (BivarPoly, EnclosureBudgetError, Rect, abs_sup_batch, differentiate,
                   enclose_batch_full,
                   range_on_rect)

STOP, DEPTH_CAP = 0, 1
STOP_REASONS = ("stopping-rule", "depth-cap")
DEFAULT_BUDGET = 4_000_000
AUDIT_SUB = 2


class ResolutionBudgetError(RuntimeError):
    """The quartering recursion would exceed the configured number of squares."""

    def __init__(self, message: str, depth_reached: int, processed: int, frontier: int):
        super().__init__(message)
        self.depth_reached = depth_reached
        self.processed = processed
        self.frontier = frontier


# --------------------------------------------------------------------------
# dyadic bookkeeping

@dataclass(frozen=True)
class DyadicInterval:
    """``[k 2^s, (k + 1) 2^s]``."""

    k: int
    s: int

    @property
    def lo(self) -> Fraction:
        return Fraction(self.k) * Fraction(2) ** self.s

    @property
    def hi(self) -> Fraction:
        return Fraction(self.k + 1) * Fraction(2) ** self.s

    @property
    def length(self) -> Fraction:
        return Fraction(2) ** self.s

    def parent(self) -> "DyadicInterval":
        return DyadicInterval(self.k >> 1, self.s + 1)

    def contains(self, other: "DyadicInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


@dataclass(frozen=True)
class DyadicRect:
    x_side: DyadicInterval
    y_side: DyadicInterval
    generation: int = 0
    stop_reason: str = "stopping-rule"

    @classmethod
    def square(cls, e: int, ix: int, iy: int, generation: int = 0, stop_reason: str = "stopping-rule"):
        return cls(DyadicInterval(int(ix), int(e)), DyadicInterval(int(iy), int(e)), generation, stop_reason)

    def as_rect(self) -> Rect:
        return Rect(self.x_side.lo, self.x_side.hi, self.y_side.lo, self.y_side.hi)

    def as_floats(self) -> tuple[float, float, float, float]:
        return (float(self.x_side.lo), float(self.x_side.hi), float(self.y_side.lo), float(self.y_side.hi))


def _pow2(e) -> np.ndarray:
    return np.ldexp(1.0, np.asarray(e, dtype=np.int64))


def _is_power_of_two(q: Fraction) -> bool:
    q = Fraction(q)
    return q > 0 and (q.numerator & (q.numerator - 1)) == 0 and (q.denominator & (q.denominator - 1)) == 0 \
        and (q.numerator == 1 or q.denominator == 1)


def _log2_exact(q: Fraction) -> int:
    q = Fraction(q)
    return q.numerator.bit_length() - 1 if q.denominator == 1 else -(q.denominator.bit_length() - 1)


# --------------------------------------------------------------------------
# sector geometry

def _cmp_curve(y: np.ndarray, coef: Fraction, x: np.ndarray, M: Fraction) -> np.ndarray:
    """Sign of ``y - coef * x^M`` for ``x >= 0``, exact."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    curve = float(coef) * np.power(np.maximum(x, 0.0), float(M))
    diff = y - curve
    scale = np.abs(y) + np.abs(curve)
    sign = np.sign(diff)
    unsure = np.abs(diff) <= 1e-9 * scale
    if np.any(unsure):
        p, q = M.numerator, M.denominator
        for i in np.flatnonzero(unsure):
            yi, xi = Fraction(float(y.flat[i])), Fraction(float(x.flat[i]))
            rhs_sign = (coef > 0) - (coef < 0)
            if xi == 0:
                sign.flat[i] = (yi > 0) - (yi < 0)
                continue
            if yi <= 0 and rhs_sign >= 0:
                sign.flat[i] = 0 if (yi == 0 and rhs_sign == 0) else -1
                continue
            if yi >= 0 and rhs_sign <= 0:
                sign.flat[i] = 0 if (yi == 0 and rhs_sign == 0) else 1
                continue
            # same sign: compare |y|^q with |coef|^q x^p
            lhs = abs(yi) ** q
            rhs = abs(coef) ** q * xi ** p
            s = (lhs > rhs) - (lhs < rhs)
            sign.flat[i] = s if yi > 0 else -s
    return sign.astype(int)


@dataclass(frozen=True)
class SectorRegion:
    """``{x ~ 2^j, (c - w) x^M < y < (c + w) x^M}`` with ``w = eps`` (``U``) or ``2 eps`` (``U*``).

    ``x ~ 2^j`` means ``[2^(j-1), 2^(j+1)]`` for ``U``; the starred region
    uses the wider shell ``[2^(j-2), 2^(j+2)]`` so that doubles of squares at
    the ends of the shell can still fit.
    """

    j: int
    M: Fraction
    c: Fraction
    eps: Fraction
    variant: str = "U"

    def __post_init__(self):
        for name in ("M", "c", "eps"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.variant not in ("U", "U*"):
            raise ValueError("variant must be 'U' or 'U*'")
        if self.M <= 0 or self.eps <= 0:
            raise ValueError("M and eps must be positive")

    def star(self) -> "SectorRegion":
        return SectorRegion(self.j, self.M, self.c, self.eps, "U*")

    @property
    def half_width(self) -> Fraction:
        return self.eps if self.variant == "U" else 2 * self.eps

    @property
    def x_range(self) -> tuple[Fraction, Fraction]:
        spread = 1 if self.variant == "U" else 2
        return Fraction(2) ** (self.j - spread), Fraction(2) ** (self.j + spread)

    @property
    def lower_coef(self) -> Fraction:
        return self.c - self.half_width

    @property
    def upper_coef(self) -> Fraction:
        return self.c + self.half_width

    def contains_points(self, x, y) -> np.ndarray:
        xa, xb = (float(v) for v in self.x_range)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = (x >= xa) & (x <= xb)
        return inside & (_cmp_curve(y, self.lower_coef, x, self.M) > 0) & (_cmp_curve(y, self.upper_coef, x, self.M) < 0)

    def meets(self, rects: np.ndarray) -> np.ndarray:
        """Which closed rectangles intersect the region."""
        rects = np.atleast_2d(rects)
        xa, xb = (float(v) for v in self.x_range)
        a = np.maximum(rects[:, 0], xa)
        b = np.minimum(rects[:, 1], xb)
        ok = a <= b
        # both boundary curves increase with x; test y-span against the extreme x
        ok &= _cmp_curve(rects[:, 2], self.upper_coef, b, self.M) < 0
        ok &= _cmp_curve(rects[:, 3], self.lower_coef, a, self.M) > 0
        return ok

    def contains_rects(self, rects: np.ndarray) -> np.ndarray:
        """Which closed rectangles lie inside the (open-in-y) region."""
        rects = np.atleast_2d(rects)
        xa, xb = (float(v) for v in self.x_range)
        ok = (rects[:, 0] >= xa) & (rects[:, 1] <= xb)
        low_x = rects[:, 1] if self.lower_coef > 0 else rects[:, 0]
        ok &= _cmp_curve(rects[:, 2], self.lower_coef, low_x, self.M) > 0
        ok &= _cmp_curve(rects[:, 3], self.upper_coef, rects[:, 0], self.M) < 0
        return ok

    def bounding_box(self) -> tuple[float, float, float, float]:
        xa, xb = (float(v) for v in self.x_range)
        lc, uc, M = float(self.lower_coef), float(self.upper_coef), float(self.M)
        ylo = lc * (xb ** M if lc < 0 else xa ** M)
        return xa, xb, ylo, uc * xb ** M

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform points of the region by rejection from its bounding box."""
        x0, x1, y0, y1 = self.bounding_box()
        out = []
        got = 0
        while got < count:
            m = max(2 * (count - got), 1024)
            pts = np.column_stack([rng.uniform(x0, x1, m), rng.uniform(y0, y1, m)])
            pts = pts[self.contains_points(pts[:, 0], pts[:, 1])]
            out.append(pts)
            got += len(pts)
        return np.concatenate(out)[:count]


def sector_for_root(H: BivarPoly, edge_index: int, root_index: int, j: int) -> tuple[SectorRegion, EdgeData, EdgeRoot]:
    """Sector around the ``root_index``-th positive root of the ``edge_index``-th edge."""
    nd = newton_polyhedron(H)
    if not nd.edges:
        raise ValueError("H has no compact Newton edge, so there is no root sector")
    edge = nd.edges[edge_index]
    positive = [r for r in edge.real_roots if r.active]
    if not positive:
        raise ValueError(f"edge {edge_index} has no positive root")
    root = positive[root_index]
    return SectorRegion(j, edge.M, root.exact, sector_eps(edge, root)), edge, root


# --------------------------------------------------------------------------
# initial cover

@dataclass
class InitialCover:
    mu: Fraction
    e: int
    ix: np.ndarray
    iy: np.ndarray

    @property
    def side(self) -> float:
        return math.ldexp(1.0, self.e)

    def squares(self) -> list[DyadicRect]:
        return [DyadicRect.square(self.e, a, b) for a, b in zip(self.ix, self.iy)]

    def rects(self) -> np.ndarray:
        return _square_rects(np.full(len(self.ix), self.e), self.ix, self.iy)

    def __len__(self):
        return len(self.ix)


def _square_rects(e, ix, iy) -> np.ndarray:
    side = _pow2(e)
    x0 = ix * side
    y0 = iy * side
    return np.column_stack([x0, x0 + side, y0, y0 + side])


def initial_side_exponent(region: SectorRegion, mu: Fraction) -> int:
    M = max(region.M, Fraction(1))
    return _log2_exact(mu) + math.floor(M * region.j)


def enumerate_meeting(region: SectorRegion, e: int) -> tuple[np.ndarray, np.ndarray]:
    """All dyadic squares of side ``2^e`` meeting the region (brute force over its bounding box)."""
    side = math.ldexp(1.0, e)
    x0, x1, y0, y1 = region.bounding_box()
    ixs = np.arange(math.floor(x0 / side) - 1, math.ceil(x1 / side) + 1, dtype=np.int64)
    iys = np.arange(math.floor(y0 / side) - 1, math.ceil(y1 / side) + 1, dtype=np.int64)
    IX, IY = np.meshgrid(ixs, iys, indexing="ij")
    IX, IY = IX.ravel(), IY.ravel()
    keep = region.meets(_square_rects(np.full(IX.size, e), IX, IY))
    return IX[keep], IY[keep]


def doubles(rects: np.ndarray) -> np.ndarray:
    cx = 0.5 * (rects[:, 0] + rects[:, 1])
    cy = 0.5 * (rects[:, 2] + rects[:, 3])
    w = rects[:, 1] - rects[:, 0]
    v = rects[:, 3] - rects[:, 2]
    return np.column_stack([cx - w, cx + w, cy - v, cy + v])


def initial_cover(region: SectorRegion, mu: Fraction = Fraction(1, 16), min_mu: Fraction = Fraction(1, 2**20)) -> InitialCover:
    """Dyadic squares of side ``mu 2^(floor(M j))`` meeting ``U_j`` whose doubles lie in ``U_j*``.

    ``mu`` is halved until every meeting square passes the double test.
    """
    mu = Fraction(mu)
    if not _is_power_of_two(mu):
        raise ValueError("mu must be a power of two so the cover squares are dyadic")
    if region.variant != "U":
        raise ValueError("cover the unstarred region")
    star = region.star()
    while mu >= min_mu:
        e = initial_side_exponent(region, mu)
        ix, iy = enumerate_meeting(region, e)
        if len(ix) and np.all(star.contains_rects(doubles(_square_rects(np.full(ix.size, e), ix, iy)))):
            return InitialCover(mu, e, ix, iy)
        mu /= 2
    raise ValueError("sector too thin: no admissible mu above the floor")


# --------------------------------------------------------------------------
# stopping-time quartering

@dataclass
class HessianData:
    H: BivarPoly
    A: np.ndarray
    Ax: np.ndarray
    Ay: np.ndarray

    @classmethod
    def of(cls, H: BivarPoly) -> "HessianData":
        return cls(H, H.coeff_array(), differentiate(H, "x").coeff_array(), differentiate(H, "y").coeff_array())

    def bounds(self, rects: np.ndarray, sub: int):
        """Lower and upper bounds on sup|H|, sup|H_x|, sup|H_y| per rectangle."""
        return abs_sup_batch(self.A, rects, sub), abs_sup_batch(self.Ax, rects, sub), abs_sup_batch(self.Ay, rects, sub)


def _exact_sups(H: HessianData, rect: np.ndarray) -> tuple[float, float, float]:
    r = Rect(*(Fraction(float(v)) for v in rect))
    out = []
    for p in (H.H, differentiate(H.H, "x"), differentiate(H.H, "y")):
        if p.is_zero():
            out.append(0.0)
            continue
        try:
            lo, hi = range_on_rect(p, r)
        except EnclosureBudgetError as exc:
            lo, hi = exc.best
        out.append(max(abs(lo), abs(hi)))
    return tuple(out)


def stopping_rule(H: HessianData, rects: np.ndarray) -> np.ndarray:
    """``sqrt(a^2 + b^2) l < sup|H| / 4`` with ``a, b`` the sups of ``|H_x|, |H_y|``.

    Decided on cheap enclosures when they separate, otherwise on refined
    ones, and finally on tolerance-accurate enclosures.
    """
    rects = np.atleast_2d(rects)
    side = rects[:, 1] - rects[:, 0]
    result = np.zeros(len(rects), dtype=bool)
    todo = np.arange(len(rects))
    for sub in (1, 8):
        if todo.size == 0:
            break
        (h_lo, h_hi), (a_lo, a_hi), (b_lo, b_hi) = H.bounds(rects[todo], sub)
        l = side[todo]
        sure_stop = np.hypot(a_hi, b_hi) * l < 0.25 * h_lo
        sure_fail = np.hypot(a_lo, b_lo) * l >= 0.25 * h_hi
        result[todo[sure_stop]] = True
        todo = todo[~(sure_stop | sure_fail)]
    for i in todo:
        h, a, b = _exact_sups(H, rects[i])
        result[i] = math.hypot(a, b) * side[i] < 0.25 * h
    return result


@dataclass
class StoppingTimeResult:
    """Leaves of the quartering tree: ``F_infinity`` plus depth-capped squares."""

    e: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    depth: np.ndarray
    status: np.ndarray
    root: np.ndarray
    max_depth: int
    processed: int

    def __len__(self):
        return len(self.e)

    def rects(self, mask=None) -> np.ndarray:
        sel = slice(None) if mask is None else mask
        return _square_rects(self.e[sel], self.ix[sel], self.iy[sel])

    @property
    def stopped(self) -> np.ndarray:
        return self.status == STOP

    @property
    def capped(self) -> np.ndarray:
        return self.status == DEPTH_CAP

    def f_infinity(self) -> "StoppingTimeResult":
        return self.subset(self.stopped)

    def subset(self, mask) -> "StoppingTimeResult":
        return StoppingTimeResult(self.e[mask], self.ix[mask], self.iy[mask], self.depth[mask],
                                  self.status[mask], self.root[mask], self.max_depth, self.processed)

    def __iter__(self) -> Iterator[DyadicRect]:
        for e, a, b, d, s in zip(self.e, self.ix, self.iy, self.depth, self.status):
            yield DyadicRect.square(int(e), int(a), int(b), int(d), STOP_REASONS[int(s)])

    def to_list(self) -> list[DyadicRect]:
        return list(self)


def _as_square_arrays(squares) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(squares, InitialCover):
        n = len(squares)
        return np.full(n, squares.e, dtype=np.int64), squares.ix.astype(np.int64), squares.iy.astype(np.int64)
    e, ix, iy = [], [], []
    for sq in squares:
        if sq.x_side.s != sq.y_side.s:
            raise ValueError("stopping-time input must be dyadic squares")
        e.append(sq.x_side.s)
        ix.append(sq.x_side.k)
        iy.append(sq.y_side.k)
    return np.array(e, dtype=np.int64), np.array(ix, dtype=np.int64), np.array(iy, dtype=np.int64)


def stopping_time_decompose(H: BivarPoly, squares, max_depth: int = 24,
                            budget: int = DEFAULT_BUDGET) -> StoppingTimeResult:
    """Quarter every square that fails the stopping rule, down to ``max_depth`` levels.

    ``budget`` caps the total number of squares examined; exceeding it raises
    :class:`ResolutionBudgetError` rather than returning a truncated tree.
    """
    if H.is_zero():
        raise ValueError("H must not vanish identically")
    e, ix, iy = _as_square_arrays(squares)
    return _decompose_arrays(HessianData.of(H), e, ix, iy, np.zeros(len(e), dtype=np.int64),
                             np.arange(len(e), dtype=np.int64), max_depth, budget)


def _decompose_arrays(hd: HessianData, e, ix, iy, depth, root, max_depth: int, budget: int) -> StoppingTimeResult:
    leaves: list[tuple] = []
    processed = 0
    while len(e):
        processed += len(e)
        if processed > budget:
            level = int(depth.min())
            raise ResolutionBudgetError(
                f"stopping-time recursion exceeded {budget} squares at depth {level} of {max_depth} "
                f"({len(e)} squares pending on this level)", level, processed, len(e))
        stop = stopping_rule(hd, _square_rects(e, ix, iy))
        cap = ~stop & (depth >= max_depth)
        for mask, status in ((stop, STOP), (cap, DEPTH_CAP)):
            if np.any(mask):
                leaves.append((e[mask], ix[mask], iy[mask], depth[mask], np.full(mask.sum(), status), root[mask]))
        go = ~stop & ~cap
        e, ix, iy, depth, root = e[go], ix[go], iy[go], depth[go], root[go]
        # quarter: four children per failing square
        e = np.repeat(e - 1, 4)
        ix = np.repeat(2 * ix, 4) + np.tile([0, 1, 0, 1], len(ix))
        iy = np.repeat(2 * iy, 4) + np.tile([0, 0, 1, 1], len(iy))
        depth = np.repeat(depth + 1, 4)
        root = np.repeat(root, 4)
    if leaves:
        cols = [np.concatenate([leaf[i] for leaf in leaves]) for i in range(6)]
    else:
        cols = [np.zeros(0, dtype=np.int64) for _ in range(6)]
    return StoppingTimeResult(*cols, max_depth=max_depth, processed=processed)


def deepen(H: BivarPoly, result: StoppingTimeResult, extra: int = 1,
           budget: int = DEFAULT_BUDGET) -> StoppingTimeResult:
    """The decomposition with ``max_depth + extra``: only depth-capped leaves are reopened."""
    capped = result.capped
    if not np.any(capped):
        return StoppingTimeResult(result.e, result.ix, result.iy, result.depth, result.status, result.root,
                                  result.max_depth + extra, result.processed)
    c = result.subset(capped)
    # quarter the capped leaves once, then recurse on the children with a shifted depth cap
    e = np.repeat(c.e - 1, 4)
    ix = np.repeat(2 * c.ix, 4) + np.tile([0, 1, 0, 1], len(c))
    iy = np.repeat(2 * c.iy, 4) + np.tile([0, 0, 1, 1], len(c))
    sub = _decompose_arrays(HessianData.of(H), e, ix, iy, np.repeat(c.depth + 1, 4), np.repeat(c.root, 4),
                            result.max_depth + extra, budget)
    keep = result.subset(~capped)
    cols = [np.concatenate([getattr(keep, f), getattr(sub, f)]) for f in ("e", "ix", "iy", "depth", "status", "root")]
    return StoppingTimeResult(*cols, max_depth=result.max_depth + extra, processed=result.processed + sub.processed)


def bernstein_delta0(H: BivarPoly, result: StoppingTimeResult, sub: int = AUDIT_SUB) -> float:
    """``min l sup|grad H| / sup|H|`` over the stopped squares (gradient as sqrt(a^2 + b^2))."""
    f = result.f_infinity()
    if len(f) == 0:
        return math.nan
    rects = f.rects()
    (h_lo, h_hi), (a_lo, a_hi), (b_lo, b_hi) = HessianData.of(H).bounds(rects, sub)
    side = rects[:, 1] - rects[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.hypot(a_hi, b_hi) * side / h_hi
    return float(np.min(ratio))


# --------------------------------------------------------------------------
# expansion

@dataclass
class ExpandedSet:
    """The family ``G``: expanded rectangles with their dyadic sides and bins."""

    kx: np.ndarray
    sx: np.ndarray
    ky: np.ndarray
    sy: np.ndarray
    expanded: np.ndarray  # 0 none, 1 x, 2 y, 3 both
    W: np.ndarray
    k: np.ndarray
    m: np.ndarray
    n: np.ndarray
    base_count: int = 0

    SIDES = ("none", "x", "y", "xy")

    def __len__(self):
        return len(self.kx)

    def rects(self) -> np.ndarray:
        wx, wy = _pow2(self.sx), _pow2(self.sy)
        return np.column_stack([self.kx * wx, (self.kx + 1) * wx, self.ky * wy, (self.ky + 1) * wy])

    def dilates(self, eps: float) -> np.ndarray:
        return dilate(self.rects(), eps)

    def bins(self) -> np.ndarray:
        return np.column_stack([self.k, self.m, self.n])

    def __iter__(self) -> Iterator["ExpandedRect"]:
        for i in range(len(self)):
            yield ExpandedRect(
                DyadicInterval(int(self.kx[i]), int(self.sx[i])), DyadicInterval(int(self.ky[i]), int(self.sy[i])),
                self.SIDES[int(self.expanded[i])], float(self.W[i]), (int(self.k[i]), int(self.m[i]), int(self.n[i])))


@dataclass(frozen=True)
class ExpandedRect:
    I: DyadicInterval
    J: DyadicInterval
    expanded_side: str
    W: float
    bin: tuple[int, int, int]


def dilate(rects: np.ndarray, eps: float) -> np.ndarray:
    cx = 0.5 * (rects[:, 0] + rects[:, 1])
    cy = 0.5 * (rects[:, 2] + rects[:, 3])
    hw = 0.5 * (1 + eps) * (rects[:, 1] - rects[:, 0])
    hv = 0.5 * (1 + eps) * (rects[:, 3] - rects[:, 2])
    return np.column_stack([cx - hw, cx + hw, cy - hv, cy + hv])


def _rects_from_sides(kx, sx, ky, sy) -> np.ndarray:
    wx, wy = _pow2(sx), _pow2(sy)
    return np.column_stack([kx * wx, (kx + 1) * wx, ky * wy, (ky + 1) * wy])


def _grow(hd: HessianData, star: SectorRegion, delta: float, kx, sx, ky, sy, active, axis: str, sub: int):
    """Grow one side through its dyadic ancestors while the expansion inequality holds."""
    kx, sx, ky, sy = kx.copy(), sx.copy(), ky.copy(), sy.copy()
    deriv = hd.Ax if axis == "x" else hd.Ay
    idx = np.flatnonzero(active)
    while idx.size:
        if axis == "x":
            ckx, csx, cky, csy = kx[idx] >> 1, sx[idx] + 1, ky[idx], sy[idx]
            length = _pow2(csx)
        else:
            ckx, csx, cky, csy = kx[idx], sx[idx], ky[idx] >> 1, sy[idx] + 1
            length = _pow2(csy)
        cand = _rects_from_sides(ckx, csx, cky, csy)
        ok = star.contains_rects(cand)
        if np.any(ok):
            sel = np.flatnonzero(ok)
            _, h_hi = abs_sup_batch(hd.A, cand[sel], sub)
            _, d_hi = abs_sup_batch(deriv, cand[sel], sub)
            ok[sel] = length[sel] * d_hi <= delta * h_hi
        idx = idx[ok]
        if axis == "x":
            kx[idx], sx[idx] = ckx[ok], csx[ok]
        else:
            ky[idx], sy[idx] = cky[ok], csy[ok]
    return kx, sx, ky, sy


def expand_rectangles(f_inf, H: BivarPoly, delta: float, region: SectorRegion, mu: Fraction | None = None,
                      d_i: Fraction | None = None, sub: int = AUDIT_SUB) -> ExpandedSet:
    """Map each stopped square to its maximal one-directional dyadic expansion and deduplicate.

    A side is grown when its directional condition
    ``l sup|dH| > (delta / 2) sup|H|`` fails; growth goes through dyadic
    ancestors while ``|side| sup|dH| <= delta sup|H|`` on the grown
    rectangle and the rectangle stays inside ``U_j*``. Bins need ``mu`` and
    the weighted edge degree ``d_i``.
    """
    if isinstance(f_inf, StoppingTimeResult):
        f = f_inf.f_infinity()
        e, ix, iy = f.e, f.ix, f.iy
    else:
        e, ix, iy = _as_square_arrays([r for r in f_inf if r.stop_reason == "stopping-rule"])
    hd = HessianData.of(H)
    star = region.star() if region.variant == "U" else region
    kx, sx, ky, sy = ix.copy(), e.copy(), iy.copy(), e.copy()
    rects = _rects_from_sides(kx, sx, ky, sy)
    (_, h_hi), (_, a_hi), (_, b_hi) = hd.bounds(rects, sub)
    side = rects[:, 1] - rects[:, 0]
    case_x = side * a_hi > 0.5 * delta * h_hi
    case_y = side * b_hi > 0.5 * delta * h_hi
    kx, sx, ky, sy = _grow(hd, star, delta, kx, sx, ky, sy, ~case_x, "x", sub)
    kx, sx, ky, sy = _grow(hd, star, delta, kx, sx, ky, sy, ~case_y, "y", sub)
    expanded = (~case_x).astype(np.int64) + 2 * (~case_y).astype(np.int64)
    # G is the range of the map: deduplicate identical rectangles
    keys = np.column_stack([kx, sx, ky, sy])
    _, first = np.unique(keys, axis=0, return_index=True)
    first = np.sort(first)
    kx, sx, ky, sy, expanded = kx[first], sx[first], ky[first], sy[first], expanded[first]
    _, W = abs_sup_batch(hd.A, _rects_from_sides(kx, sx, ky, sy), sub)
    if mu is not None and d_i is not None:
        k, m, n = bin_indices(W, sx, sy, region.j, Fraction(d_i), Fraction(mu))
    else:
        k = m = n = np.zeros(len(kx), dtype=np.int64)
    return ExpandedSet(kx, sx, ky, sy, expanded, W, k, m, n, base_count=len(e))


def bin_indices(sup_h: np.ndarray, sx: np.ndarray, sy: np.ndarray, j: int, d_i: Fraction, mu: Fraction):
    """``2^(k + d_i j - 1) <= sup|H| < 2^(k + d_i j)``, ``|I| = mu 2^(m + j)``, ``|J| = mu 2^(n + j)``."""
    lm = _log2_exact(mu)
    k = np.floor(np.log2(sup_h) - float(d_i) * j).astype(np.int64) + 1
    return k, sx - lm - j, sy - lm - j


def expand_side_again(H: BivarPoly, g: ExpandedSet, delta: float, region: SectorRegion, sub: int = AUDIT_SUB) -> ExpandedSet:
    """Re-run the growth on the already-grown sides; maximality means nothing moves."""
    hd = HessianData.of(H)
    star = region.star() if region.variant == "U" else region
    kx, sx, ky, sy = g.kx, g.sx, g.ky, g.sy
    kx, sx, ky, sy = _grow(hd, star, delta, kx, sx, ky, sy, (g.expanded & 1) > 0, "x", sub)
    kx, sx, ky, sy = _grow(hd, star, delta, kx, sx, ky, sy, (g.expanded & 2) > 0, "y", sub)
    return ExpandedSet(kx, sx, ky, sy, g.expanded.copy(), g.W.copy(), g.k, g.m, g.n, g.base_count)


def expansion_maximal(H: BivarPoly, g: ExpandedSet, delta: float, region: SectorRegion, sub: int = AUDIT_SUB) -> bool:
    """One more dyadic level on any grown side breaks the inequality or leaves ``U_j*``."""
    hd = HessianData.of(H)
    star = region.star() if region.variant == "U" else region
    for bit, axis in ((1, "x"), (2, "y")):
        sel = (g.expanded & bit) > 0
        if not np.any(sel):
            continue
        if axis == "x":
            kx, sx, ky, sy = g.kx[sel] >> 1, g.sx[sel] + 1, g.ky[sel], g.sy[sel]
            length, deriv = _pow2(sx), hd.Ax
        else:
            kx, sx, ky, sy = g.kx[sel], g.sx[sel], g.ky[sel] >> 1, g.sy[sel] + 1
            length, deriv = _pow2(sy), hd.Ay
        cand = _rects_from_sides(kx, sx, ky, sy)
        inside = star.contains_rects(cand)
        _, h_hi = abs_sup_batch(hd.A, cand, sub)
        _, d_hi = abs_sup_batch(deriv, cand, sub)
        if np.any(inside & (length * d_hi <= delta * h_hi)):
            return False
    return True


# --------------------------------------------------------------------------
# audits

@dataclass
class ComparabilityReport:
    max_ratio: float
    c2_ratio: float
    violations: list = field(default_factory=list)


def audit_comparability(g: ExpandedSet, H: BivarPoly, eps: float, sub: int = AUDIT_SUB) -> ComparabilityReport:
    """Worst ``sup|H| / inf|H|`` on the ``(1 + eps)``-dilates and worst ``sup_dilate / sup_R``."""
    if len(g) == 0:
        return ComparabilityReport(1.0, 1.0, [])
    A = H.coeff_array()
    base = g.rects()
    dil = dilate(base, eps)
    lo, hi, _, _ = enclose_batch_full(A, dil, sub)
    sup_d = np.maximum(np.abs(lo), np.abs(hi))
    inf_d = np.where(lo > 0, lo, np.where(hi < 0, -hi, 0.0))
    sup_r, _ = abs_sup_batch(A, base, sub)
    bad = np.flatnonzero(inf_d <= 0)
    # retry straddling enclosures with exact subdivision before calling them violations
    violations = []
    for i in bad:
        r = Rect(*(Fraction(float(v)) for v in dil[i]))
        try:
            lo, hi = range_on_rect(H, r)
        except EnclosureBudgetError as exc:
            lo, hi = exc.best
        if lo > 0 or hi < 0:
            inf_d[i] = lo if lo > 0 else -hi
            sup_d[i] = max(abs(lo), abs(hi))
        else:
            violations.append(tuple(float(v) for v in dil[i]))
    ok = inf_d > 0
    ratio = np.where(ok, sup_d / np.where(ok, inf_d, 1.0), np.inf)
    good = ok & (sup_r > 0)
    c2 = float(np.max(sup_d[good] / sup_r[good])) if np.any(good) else math.nan
    max_ratio = float(np.max(ratio[ok])) if np.any(ok) else math.inf
    return ComparabilityReport(max_ratio, c2, violations)


def audit_overlap(g: ExpandedSet | np.ndarray, eps: float, samples: int = 0,
                  rng: np.random.Generator | None = None, region: SectorRegion | None = None) -> int:
    """Largest number of open ``(1 + eps)``-dilates sharing a point.

    The exact value comes from a plane sweep over the arrangement; optional
    Monte-Carlo samples (inside ``region`` when given) are counted by brute
    force and can only confirm it from below.
    """
    from .kernels_geom import max_overlap_open, count_containing

    rects = g.rects() if isinstance(g, ExpandedSet) else np.asarray(g, dtype=float)
    if len(rects) == 0:
        return 0
    dil = np.ascontiguousarray(dilate(rects, eps))
    exact = int(max_overlap_open(dil))
    if samples:
        rng = rng if rng is not None else np.random.default_rng(0)
        if region is not None:
            pts = region.sample(samples, rng)
        else:
            lo = dil.min(axis=0)
            hi = dil.max(axis=0)
            pts = np.column_stack([rng.uniform(lo[0], hi[1], samples), rng.uniform(lo[2], hi[3], samples)])
        mc = int(count_containing(dil, np.ascontiguousarray(pts)).max())
        if mc > exact:
            raise AssertionError(f"Monte-Carlo overlap {mc} exceeds exact sweep {exact}")
    return exact


@dataclass
class EccentricityReport:
    sigma: float
    C: float
    slope: float


def audit_eccentricity(g: ExpandedSet | np.ndarray, C: float = 16.0) -> EccentricityReport:
    """Smallest ``sigma >= 1`` with ``max(|I|,|J|)^sigma <= C min(|I|,|J|)`` for all members,
    plus the least-squares slope of ``log min`` against ``log max``."""
    rects = g.rects() if isinstance(g, ExpandedSet) else np.asarray(g, dtype=float)
    if len(rects) < 2:
        raise ValueError("need at least two rectangles")
    w = rects[:, 1] - rects[:, 0]
    v = rects[:, 3] - rects[:, 2]
    big, small = np.log2(np.maximum(w, v)), np.log2(np.minimum(w, v))
    if np.any(big >= 0):
        raise ValueError("eccentricity audit expects sides below 1")
    # max^sigma <= C min  <=>  sigma >= (log2 min + log2 C) / log2 max  (log2 max < 0)
    need = (small + math.log2(C)) / big
    sigma = float(max(1.0, need.max()))
    c_needed = float(np.max(2.0 ** (sigma * big - small)))
    if np.ptp(big) > 0:
        slope = float(np.polyfit(big, small, 1)[0])
    else:
        slope = float(np.mean(small / big))
    return EccentricityReport(sigma, c_needed, slope)


def _max_closed_overlap(lo: np.ndarray, hi: np.ndarray) -> int:
    # closed intervals: at ties process openings before closings
    pos = np.concatenate([lo, hi])
    kind = np.concatenate([np.zeros(len(lo)), np.ones(len(hi))])
    order = np.lexsort((kind, pos))
    delta = np.where(kind[order] == 0, 1, -1)
    return int(np.max(np.cumsum(delta))) if len(delta) else 0


def audit_line_orthogonality(g: ExpandedSet, eps: float, bins: np.ndarray | None = None) -> tuple[int, dict]:
    """Max number of same-bin dilates met by one horizontal or vertical line."""
    dil = g.dilates(eps)
    bins = g.bins() if bins is None else bins
    per_bin = {}
    if len(dil) == 0:
        return 0, per_bin
    keys, inverse = np.unique(bins, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    best = 0
    for b, key in enumerate(keys):
        sel = inverse == b
        vert = _max_closed_overlap(dil[sel, 0], dil[sel, 1])
        horiz = _max_closed_overlap(dil[sel, 2], dil[sel, 3])
        per_bin[tuple(int(v) for v in key)] = max(vert, horiz)
        best = max(best, vert, horiz)
    return best, per_bin


@dataclass
class BinWindow:
    ok: bool
    c1: Optional[int]
    c2: Optional[int]

    def __bool__(self):
        return self.ok


def fit_bin_window(bins: np.ndarray, r: int, cap: int = 64) -> BinWindow:
    """Integers ``c1, c2`` with ``c1 + k < m, n < c2 + k / r`` for every bin."""
    bins = np.atleast_2d(np.asarray(bins))
    if bins.size == 0:
        return BinWindow(True, 0, 0)
    k = bins[:, 0].astype(float)
    sides = bins[:, 1:3].astype(float)
    c1 = int(math.ceil(float(np.min(sides - k[:, None])))) - 1
    c2 = int(math.floor(float(np.max(sides - k[:, None] / r)))) + 1
    return BinWindow(abs(c1) <= cap and abs(c2) <= cap, c1, c2)


def audit_bin_window(g: ExpandedSet | np.ndarray, j: int, d_i, r: int, cap: int = 64) -> bool:
    bins = g.bins() if isinstance(g, ExpandedSet) else np.asarray(g)
    return bool(fit_bin_window(bins, r, cap))


@dataclass
class CoverageReport:
    sampled: int
    counted: int
    in_stopped: int
    in_capped: int
    missing: int

    @property
    def coverage(self) -> float:
        return self.in_stopped / self.counted if self.counted else 1.0

    @property
    def capped_fraction(self) -> float:
        return self.in_capped / self.counted if self.counted else 0.0


def locate(result: StoppingTimeResult, pts: np.ndarray) -> np.ndarray:
    """Index of the leaf containing each point, -1 if none."""
    out = np.full(len(pts), -1, dtype=np.int64)
    for e in np.unique(result.e):
        sel = np.flatnonzero(result.e == e)
        side = math.ldexp(1.0, int(e))
        keys = result.ix[sel] * (1 << 31) + result.iy[sel]
        order = np.argsort(keys)
        skeys = keys[order]
        px = np.floor(pts[:, 0] / side).astype(np.int64)
        py = np.floor(pts[:, 1] / side).astype(np.int64)
        q = px * (1 << 31) + py
        pos = np.clip(np.searchsorted(skeys, q), 0, len(skeys) - 1)
        hit = (skeys[pos] == q) & (out < 0)
        out[hit] = sel[order[pos[hit]]]
    return out


def audit_coverage(result: StoppingTimeResult, region: SectorRegion, H: BivarPoly, samples: int,
                   rng: np.random.Generator, floor: float = 1e-9) -> CoverageReport:
    """Share of sampled ``U_j`` points with ``|H|`` above the floor that land in stopped squares."""
    pts = region.sample(samples, rng)
    vals = np.abs(H(pts[:, 0], pts[:, 1]))
    x0, x1, y0, y1 = region.bounding_box()
    sup_u = abs_sup_batch(H.coeff_array(), np.array([[x0, x1, y0, y1]]), 8)[1][0]
    keep = vals > floor * sup_u
    where = locate(result, pts[keep])
    status = np.where(where >= 0, result.status[np.maximum(where, 0)], -1)
    return CoverageReport(samples, int(keep.sum()), int(np.sum(status == STOP)),
                          int(np.sum(status == DEPTH_CAP)), int(np.sum(status < 0)))


def descend_coverage(H: BivarPoly, cover: InitialCover, region: SectorRegion, max_depth: int, samples: int,
                     rng: np.random.Generator, floor: float = 1e-9) -> CoverageReport:
    """Coverage by following each sample point down its own branch of the quartering tree.

    Only the squares containing sample points are ever examined, so this
    reaches depths where the full leaf family cannot be stored.
    """
    hd = HessianData.of(H)
    pts = region.sample(samples, rng)
    vals = np.abs(H(pts[:, 0], pts[:, 1]))
    x0, x1, y0, y1 = region.bounding_box()
    sup_u = abs_sup_batch(hd.A, np.array([[x0, x1, y0, y1]]), 8)[1][0]
    pts = pts[vals > floor * sup_u]
    side = cover.side
    px = np.floor(pts[:, 0] / side).astype(np.int64)
    py = np.floor(pts[:, 1] / side).astype(np.int64)
    keys = np.sort(cover.ix * (1 << 31) + cover.iy)
    q = px * (1 << 31) + py
    pos = np.clip(np.searchsorted(keys, q), 0, len(keys) - 1)
    found = keys[pos] == q
    missing = int((~found).sum())
    pts, px, py = pts[found], px[found], py[found]
    e = cover.e
    stopped = capped = 0
    for depth in range(max_depth + 1):
        if len(pts) == 0:
            break
        sq, inv = np.unique(np.column_stack([px, py]), axis=0, return_inverse=True)
        inv = np.asarray(inv).ravel()
        stop = stopping_rule(hd, _square_rects(np.full(len(sq), e), sq[:, 0], sq[:, 1]))[inv]
        stopped += int(stop.sum())
        if depth == max_depth:
            capped += int((~stop).sum())
            break
        pts, px, py = pts[~stop], px[~stop], py[~stop]
        e -= 1
        half = math.ldexp(1.0, e)
        px = 2 * px + (pts[:, 0] >= (2 * px + 1) * half)
        py = 2 * py + (pts[:, 1] >= (2 * py + 1) * half)
    counted = stopped + capped + missing
    return CoverageReport(samples, counted, stopped, capped, missing)


# --------------------------------------------------------------------------
# one-call driver

@dataclass
class ResolutionConfig:
    edge: int = 0
    root: int = 0
    j: int = -6
    mu: Fraction = Fraction(1, 16)
    eps: float = 1 / 8
    delta: Optional[float] = None
    max_depth: int = 24
    budget: int = DEFAULT_BUDGET
    samples: int = 200_000
    overlap_samples: int = 4096
    seed: int = 0


@dataclass
class ResolutionReport:
    config: ResolutionConfig
    region: SectorRegion
    mu: Fraction
    d_i: Fraction
    multiplicity: int
    cover_size: int
    f_inf: StoppingTimeResult
    g: ExpandedSet
    delta0: float
    delta0_refined: float
    delta: float
    coverage: CoverageReport
    comparability: ComparabilityReport
    overlap: int
    eccentricity: EccentricityReport
    line_orthogonality: int
    bin_window: BinWindow

    def audits(self) -> dict:
        return {
            "coverage": self.coverage.coverage,
            "capped_fraction": self.coverage.capped_fraction,
            "overlap": self.overlap,
            "comparability": {"max_ratio": self.comparability.max_ratio, "c2_ratio": self.comparability.c2_ratio,
                              "violations": len(self.comparability.violations)},
            "sigma": {"sigma": self.eccentricity.sigma, "C": self.eccentricity.C, "slope": self.eccentricity.slope},
            "line_orthogonality": self.line_orthogonality,
            "bin_window": {"ok": self.bin_window.ok, "c1": self.bin_window.c1, "c2": self.bin_window.c2},
            "bernstein_delta0": self.delta0,
            "bernstein_delta0_refined": self.delta0_refined,
            "gradient_norm": "sqrt(a^2+b^2) from component sups",
        }


def resolve(H: BivarPoly, cfg: ResolutionConfig) -> ResolutionReport:
    region, edge, root = sector_for_root(H, cfg.edge, cfg.root, cfg.j)
    cover = initial_cover(region, cfg.mu)
    result = stopping_time_decompose(H, cover, cfg.max_depth, cfg.budget)
    delta0 = bernstein_delta0(H, result)
    # the same audit one subdivision level deeper
    deeper = deepen(H, result, 1, cfg.budget)
    fresh = deeper.subset(deeper.depth > cfg.max_depth)
    delta0_refined = min(delta0, bernstein_delta0(H, fresh)) if len(fresh.f_infinity()) else delta0
    delta = cfg.delta if cfg.delta is not None else delta0 / 4
    g = expand_rectangles(result, H, delta, region, cover.mu, edge.weighted_degree)
    rng = np.random.default_rng(cfg.seed)
    coverage = audit_coverage(result, region, H, cfg.samples, rng)
    comp = audit_comparability(g, H, cfg.eps)
    overlap = audit_overlap(g, cfg.eps, cfg.overlap_samples, rng, region)
    ecc = audit_eccentricity(g) if len(g) >= 2 else EccentricityReport(1.0, 1.0, 1.0)
    lines, _ = audit_line_orthogonality(g, cfg.eps)
    window = fit_bin_window(g.bins(), root.multiplicity)
    return ResolutionReport(cfg, region, cover.mu, edge.weighted_degree, root.multiplicity, len(cover), result, g,
                            delta0, delta0_refined, delta, coverage, comp, overlap, ecc, lines, window)
