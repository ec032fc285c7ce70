"""Curved trapezoids ``{a < x < b, g(x) < y < h(x)}`` with tabulated boundaries."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .poly import BivarPoly, Rect

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class Boundary:
    """Monotone boundary curve sampled on a table, linearly interpolated.

    ``source`` names the polynomial whose zero set the curve follows (None for
    a straight slab edge) and ``branch`` its position among that
    polynomial's branches over the slab, counted from below.
    """

    xs: np.ndarray
    ys: np.ndarray
    source: Optional[BivarPoly] = None
    branch: Optional[int] = None

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)

    def monotone(self) -> bool:
        dy = np.diff(self.ys)
        return bool(np.all(dy >= 0) or np.all(dy <= 0))

    @classmethod
    def constant(cls, a: float, b: float, value: float) -> "Boundary":
        return cls(np.array([a, b], dtype=float), np.array([value, value], dtype=float))


@dataclass(frozen=True)
class CurvedTrapezoid:
    a: float
    b: float
    g: Boundary
    h: Boundary
    tags: dict = field(default_factory=dict, compare=False)

    @classmethod
    def box(cls, x_lo: float, x_hi: float, y_lo: float, y_hi: float) -> "CurvedTrapezoid":
        return cls(float(x_lo), float(x_hi), Boundary.constant(x_lo, x_hi, y_lo),
                   Boundary.constant(x_lo, x_hi, y_hi))

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = (x > self.a) & (x < self.b)
        return inside & (y > self.g(x)) & (y < self.h(x))

    def area(self, samples: int = 20001) -> float:
        xs = np.union1d(np.linspace(self.a, self.b, samples),
                        np.concatenate([self.g.xs, self.h.xs]))
        xs = xs[(xs >= self.a) & (xs <= self.b)]
        return float(_trapezoid(self.h(xs) - self.g(xs), xs))

    def is_monotone(self) -> bool:
        return self.g.monotone() and self.h.monotone()

    def well_ordered(self, samples: int = 1001) -> bool:
        xs = np.linspace(self.a, self.b, samples)[1:-1]
        return bool(np.all(self.g(xs) < self.h(xs)))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform-in-x, uniform-in-fibre interior points (not area-uniform)."""
        x = rng.uniform(self.a, self.b, count)
        lo, hi = self.g(x), self.h(x)
        t = rng.uniform(0.0, 1.0, count)
        y = lo + t * (hi - lo)
        return np.column_stack([x, y])

    def bounding_box(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, float(min(self.g.ys.min(), self.h.ys.min())),
                float(max(self.g.ys.max(), self.h.ys.max())))

    def cover_rects(self, strips: int) -> list[Rect]:
        """Rectangles over ``strips`` equal x-slices whose union contains the trapezoid."""
        xs = np.linspace(self.a, self.b, strips + 1)
        out = []
        for a, b in zip(xs, xs[1:]):
            probe = np.linspace(a, b, 17)
            # the boundaries are monotone, so their extremes over a slice sit at its ends
            lo = float(min(self.g(probe).min(), self.g.ys[(self.g.xs >= a) & (self.g.xs <= b)].min(initial=np.inf)))
            hi = float(max(self.h(probe).max(), self.h.ys[(self.h.xs >= a) & (self.h.xs <= b)].max(initial=-np.inf)))
            if hi > lo:
                out.append(Rect(Fraction(a), Fraction(b), Fraction(lo), Fraction(hi)))
        return out
