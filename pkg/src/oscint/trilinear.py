"""Discrete trilinear forms ``sum e^{i lam S} f1(x) f2(y) f3(x+y) phi`` on a shared lattice.

The x, y and x+y axes use one spacing ``h`` so the sum index ``a + b``
addresses the third function exactly. Norms are discrete L2 norms
``||f||^2 = h sum |f|^2``, which makes the form's operator norm equal to
``sqrt(h) * max |sum K v1 v2 v3|`` over unit coefficient vectors.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from . import kernels
from .newton import DEGENERATE, DegeneratePhaseError, newton_polyhedron, order_at_origin, predicted_decay
from .poly import BivarPoly, EnclosureBudgetError, Rect, convolution_hessian, differentiate, range_on_rect
from .trapezoid import CurvedTrapezoid

POINTS_PER_PERIOD = 16
DEFAULT_DOMAIN = Rect(-1, 1, -1, 1)


class SamplingError(ValueError):
    def __init__(self, n: int, n_min: int, lam: float):
        super().__init__(f"grid with n={n} under-resolves lambda={lam:g}; need n >= {n_min}")
        self.n_min = n_min


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("OSCINT_THREADS", "1")))
    except ValueError:
        return 1


# --------------------------------------------------------------------------
# cutoffs

def smoothstep(z):
    """Quintic ramp from 0 to 1 with vanishing first and second derivatives at both ends."""
    z = np.clip(z, 0.0, 1.0)
    return z * z * z * (10.0 - 15.0 * z + 6.0 * z * z)


def bump_1d(t, lo: float, hi: float, taper: float):
    ramp = (hi - lo) * taper
    return smoothstep((t - lo) / ramp) * smoothstep((hi - t) / ramp)


@dataclass(frozen=True)
class CutoffSpec:
    """Cutoff ``phi`` on the grid.

    ``indicator``: 1 on ``support``. ``bump``: product of quintic ramps of
    length ``taper * width`` at each end of ``support``. ``table``: explicit
    ``n x n`` samples. The default support is the domain shrunk by
    ``inset`` of its width on every side, which keeps the two outer grid
    layers empty for every n >= 32 and does not move with n.
    """

    kind: Literal["indicator", "bump", "table"] = "bump"
    support: Optional[tuple[float, float, float, float]] = None
    taper: float = 0.25
    inset: float = 1 / 16
    table: Optional[np.ndarray] = field(default=None, compare=False)

    def evaluate(self, X, Y, domain: Rect, h: float):
        x0, x1, y0, y1 = self.resolve_support(domain, h)
        if self.kind == "indicator":
            return ((X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)).astype(float)
        if self.kind == "bump":
            return bump_1d(X, x0, x1, self.taper) * bump_1d(Y, y0, y1, self.taper)
        raise ValueError("table cutoffs have no pointwise evaluation")

    def resolve_support(self, domain: Rect, h: float) -> tuple[float, float, float, float]:
        if self.support is not None:
            return tuple(float(v) for v in self.support)
        dx0, dx1, dy0, dy1 = domain.as_floats()
        mx, my = self.inset * (dx1 - dx0), self.inset * (dy1 - dy0)
        return dx0 + mx, dx1 - mx, dy0 + my, dy1 - my


def cutoff_from_name(name: str) -> CutoffSpec:
    if name not in ("indicator", "bump"):
        raise ValueError(f"unknown cutoff {name!r}; use 'indicator' or 'bump'")
    return CutoffSpec(kind=name)


# --------------------------------------------------------------------------
# grids

@dataclass(frozen=True)
class TrilinearGrid:
    n: int
    domain: Rect
    h: float
    x: np.ndarray
    y: np.ndarray
    phase_samples: np.ndarray
    cutoff_samples: np.ndarray
    weight: float
    phase: BivarPoly
    hessian_sup: float
    cutoff: CutoffSpec

    @property
    def sum_lattice(self) -> np.ndarray:
        # x_a + y_b for a + b = c
        return self.x[0] + self.y[0] + np.arange(2 * self.n - 1) * self.h

    def kernel(self, lam: float) -> np.ndarray:
        if lam == 0:
            return self.cutoff_samples.astype(np.complex128)
        return np.exp(1j * lam * self.phase_samples) * self.cutoff_samples

    def min_points(self, lam: float) -> int:
        """Smallest n resolving the non-degenerate part of the phase at ``lam``.

        Terms of the form p(x) + q(y) + r(x + y) are unitary relabellings of
        the three functions on a shared lattice, so only the cubic scale
        ``(lam sup|H|)^(-1/3)`` needs sampling at 16 points per period.
        """
        side = float(max(self.domain.width, self.domain.height))
        cells = side * (abs(lam) * self.hessian_sup / (2 * math.pi)) ** (1.0 / 3.0)
        return math.ceil(POINTS_PER_PERIOD * (1 + cells))

    def check_sampling(self, lam: float) -> None:
        n_min = self.min_points(lam)
        if self.n < n_min:
            raise SamplingError(self.n, n_min, lam)

    def norm(self, f) -> float:
        return float(np.sqrt(self.h * np.sum(np.abs(f) ** 2)))


def sup_abs(p: BivarPoly, r: Rect) -> float:
    try:
        lo, hi = range_on_rect(p, r)
    except EnclosureBudgetError as exc:
        lo, hi = exc.best
    return max(abs(lo), abs(hi))


def assemble_grid(S: BivarPoly, cutoff: CutoffSpec | str = "bump", domain: Rect = DEFAULT_DOMAIN,
                  n: int = 1024) -> TrilinearGrid:
    if n < 32:
        raise ValueError("n must be at least 32")
    if isinstance(cutoff, str):
        cutoff = cutoff_from_name(cutoff)
    if domain.width != domain.height:
        raise ValueError("the shared-lattice grid needs a square domain")
    x0, x1, y0, y1 = domain.as_floats()
    h = (x1 - x0) / n
    x = x0 + (np.arange(n) + 0.5) * h
    y = y0 + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(x, y, indexing="ij")
    if cutoff.kind == "table":
        phi = np.asarray(cutoff.table, dtype=float)
        if phi.shape != (n, n):
            raise ValueError(f"cutoff table has shape {phi.shape}, expected {(n, n)}")
        phi = phi.copy()
    else:
        sx0, sx1, sy0, sy1 = cutoff.resolve_support(domain, h)
        if sx0 < x0 or sx1 > x1 or sy0 < y0 or sy1 > y1:
            raise ValueError("cutoff support exceeds the domain")
        phi = cutoff.evaluate(X, Y, domain, h)
    edge = np.ones((n, n), dtype=bool)
    edge[2:-2, 2:-2] = False
    if np.any(phi[edge] != 0):
        raise ValueError("cutoff support exceeds the domain (outer two grid layers must vanish)")
    phase = S(X, Y) if not S.is_zero() else np.zeros((n, n))
    H = convolution_hessian(S)
    for arr in (x, y, phase, phi):
        arr.setflags(write=False)
    return TrilinearGrid(n=n, domain=domain, h=h, x=x, y=y, phase_samples=np.asarray(phase, dtype=float),
                         cutoff_samples=phi, weight=h * h, phase=S,
                         hessian_sup=0.0 if H.is_zero() else sup_abs(H, domain), cutoff=cutoff)


# --------------------------------------------------------------------------
# evaluation and norm estimation

def _vec(f, length: int) -> np.ndarray:
    f = np.ascontiguousarray(f, dtype=np.complex128)
    if f.shape != (length,):
        raise ValueError(f"expected vector of length {length}, got shape {f.shape}")
    return f


def trilinear_apply(g: TrilinearGrid, f1, f2, f3, lam: float) -> complex:
    g.check_sampling(lam)
    n = g.n
    K = g.kernel(lam)
    return complex(g.weight * kernels.form_value(K, _vec(f1, n), _vec(f2, n), _vec(f3, 2 * n - 1)))


@dataclass
class NormEstimate:
    value: float
    vectors: tuple[np.ndarray, np.ndarray, np.ndarray]
    histories: list[list[float]]
    iterations: list[int]


def _unit(v):
    nv = np.linalg.norm(v)
    return v / nv if nv > 0 else v


def maximize_form(K: np.ndarray, h: float, restarts: int = 8, iters: int = 400,
                  rng: np.random.Generator | None = None, starts: Sequence = (),
                  tol: float = 1e-8) -> NormEstimate:
    """Alternating maximisation of ``sqrt(h) |sum K f1 f2 f3|`` over unit vectors.

    With two arguments fixed the best third one is the normalised conjugate
    of the contraction, so the objective never decreases. Every update is
    logged in the histories (three entries per sweep).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    K = np.ascontiguousarray(K, dtype=np.complex128)
    nx, ny = K.shape
    m = nx + ny - 1

    def rand(k):
        return _unit(rng.standard_normal(k) + 1j * rng.standard_normal(k))

    inits = [(rand(nx), rand(ny), rand(m)) for _ in range(restarts)]
    inits += [tuple(_unit(np.asarray(v, dtype=np.complex128)) for v in s) for s in starts]
    best, best_vecs = 0.0, None
    histories, counts = [], []
    scale = math.sqrt(h)
    for f1, f2, f3 in inits:
        hist = [scale * abs(kernels.form_value(K, f1, f2, f3))]
        prev = hist[0]
        it = 0
        for it in range(1, iters + 1):
            c = kernels.contract_first(K, f2, f3)
            f1 = _unit(np.conj(c))
            hist.append(scale * np.linalg.norm(c))
            c = kernels.contract_second(K, f1, f3)
            f2 = _unit(np.conj(c))
            hist.append(scale * np.linalg.norm(c))
            c = kernels.contract_third(K, f1, f2)
            f3 = _unit(np.conj(c))
            cur = scale * np.linalg.norm(c)
            hist.append(cur)
            if cur == 0 or abs(cur - prev) <= tol * cur:
                break
            prev = cur
        # recompute the certified value from the final vectors
        val = scale * abs(kernels.form_value(K, f1, f2, f3))
        histories.append(hist)
        counts.append(it)
        if val > best or best_vecs is None:
            best, best_vecs = val, (f1, f2, f3)
    return NormEstimate(best, best_vecs, histories, counts)


def operator_norm(g: TrilinearGrid, lam: float, restarts: int = 8, iters: int = 400,
                  rng: np.random.Generator | int | None = None, starts: Sequence = (),
                  details: bool = False):
    if restarts < 4:
        raise ValueError("restarts must be at least 4")
    g.check_sampling(lam)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    est = maximize_form(g.kernel(lam), g.h, restarts, iters, rng, starts)
    return est if details else est.value


def indicator_box(grid_points: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return ((grid_points >= lo) & (grid_points <= hi)).astype(np.complex128)


def extremizer_ratio(S: BivarPoly, d: int, lam: float, c0: float = 1.0,
                     grid: TrilinearGrid | None = None) -> float:
    """``|form| / (||f1|| ||f2|| ||f3||)`` for indicators of ``[0, c0 lam^(-1/(3+d))]``."""
    if grid is None:
        grid = assemble_grid(S, "bump", DEFAULT_DOMAIN, 1024)
    if convolution_hessian(S).is_zero():
        raise DegeneratePhaseError("degenerate phase: no decay to probe")
    i0 = int(np.argmin(np.abs(grid.x)))
    j0 = int(np.argmin(np.abs(grid.y)))
    if grid.cutoff_samples[i0, j0] == 0:
        raise ValueError("cutoff must not vanish at the origin")
    width = c0 * lam ** (-1.0 / (3 + d))
    f1 = indicator_box(grid.x, 0.0, width)
    f2 = indicator_box(grid.y, 0.0, width)
    f3 = indicator_box(grid.sum_lattice, 0.0, width)
    if min(f1.real.sum(), f2.real.sum(), f3.real.sum()) < 4:
        raise ValueError(f"box width {width:.3g} spans fewer than 4 cells; increase n")
    val = abs(trilinear_apply(grid, f1, f2, f3, lam))
    return val / (grid.norm(f1) * grid.norm(f2) * grid.norm(f3))


# --------------------------------------------------------------------------
# sweeps

def fit_slope(lambdas: Sequence[float], values: Sequence[float], drop_ends: bool = True) -> float:
    lx = np.log2(np.asarray(lambdas, dtype=float))
    ly = np.log2(np.asarray(values, dtype=float))
    if drop_ends:
        lx, ly = lx[1:-1], ly[1:-1]
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class NormSweep:
    lambdas: list[float]
    norms: list[float]
    extremizer_ratios: list[float]
    fitted_slope: float
    extremizer_slope: float
    theory_slope: Fraction
    iterations: list[list[int]] = field(default_factory=list)
    n: int = 0

    def monotone_within(self, wiggle: float = 0.05) -> bool:
        return all(b <= a * (1 + wiggle) for a, b in zip(self.norms, self.norms[1:]))


def _check_lambdas(lambdas: Sequence[float]) -> list[float]:
    lams = [float(v) for v in lambdas]
    if len(lams) < 5:
        raise ValueError("decay sweep needs at least 5 lambdas")
    if any(v <= 0 for v in lams) or any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambdas must be positive and strictly increasing")
    ratios = [b / a for a, b in zip(lams, lams[1:])]
    if max(ratios) > min(ratios) * (1 + 1e-9):
        raise ValueError("lambdas must be geometrically spaced")
    return lams


def decay_sweep(S: BivarPoly, cutoff: CutoffSpec | str = "bump", lambdas: Sequence[float] = (),
                n: int = 2048, domain: Rect = DEFAULT_DOMAIN, restarts: int = 8, iters: int = 400,
                seed: int = 0, c0: float = 1.0, threads: int | None = None,
                probe_domain: Rect | None = None) -> NormSweep:
    """Operator norms and extremizer ratios over a geometric range of lambdas.

    The extremizer boxes sit at the origin, so when the cutoff on ``domain``
    vanishes there pass ``probe_domain``: the ratios are then measured on a
    second grid of the same size and cutoff built on that domain.
    """
    theory = predicted_decay(S)
    if theory == DEGENERATE:
        raise DegeneratePhaseError(
            "no decay: the phase is degenerate (p(x) + q(y) + r(x+y)), its Hessian vanishes identically")
    lams = _check_lambdas(lambdas)
    d = order_at_origin(convolution_hessian(S))
    grid = assemble_grid(S, cutoff, domain, n)
    probe = grid if probe_domain is None else assemble_grid(S, cutoff, probe_domain, n)
    for lam in lams:
        grid.check_sampling(lam)
        probe.check_sampling(lam)
    children = np.random.SeedSequence(seed).spawn(len(lams))

    def task(i):
        est = operator_norm(grid, lams[i], restarts, iters, np.random.default_rng(children[i]), details=True)
        return est.value, est.iterations, extremizer_ratio(S, d, lams[i], c0, probe)

    workers = threads or thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, range(len(lams))))
    else:
        results = [task(i) for i in range(len(lams))]
    norms = [r[0] for r in results]
    ratios = [r[2] for r in results]
    return NormSweep(lams, norms, ratios, fit_slope(lams, norms), fit_slope(lams, ratios),
                     -theory, [r[1] for r in results], n)


# --------------------------------------------------------------------------
# dyadic envelopes

@dataclass(frozen=True)
class ProfileRow:
    j: int
    k: int
    local_norm: float
    size_bound: float
    osc_bound: float
    flagged: bool


def dyadic_profile(S: BivarPoly, lam: float, j_range: Sequence[int], k_range: Sequence[int],
                   cutoff: CutoffSpec | str = "bump", domain: Rect = DEFAULT_DOMAIN,
                   cells: int = 64, restarts: int = 4, iters: int = 200, seed: int = 0,
                   slack: float = 4.0) -> list[ProfileRow]:
    """Local norms on boxes ``x ~ 2^j, y ~ 2^k`` against the size and oscillation envelopes.

    The oscillation envelope uses the Newton vertex monomial that dominates
    on the box, ``(lam |C| 2^(jA + kB))^(-1/6)``.
    """
    H = convolution_hessian(S)
    if H.is_zero():
        raise DegeneratePhaseError("degenerate phase: no decay to profile")
    nd = newton_polyhedron(H)
    if isinstance(cutoff, str):
        cutoff = cutoff_from_name(cutoff)
    rng = np.random.default_rng(seed)
    rows = []
    for j in j_range:
        for k in k_range:
            wx, wy = 2.0 ** j, 2.0 ** k
            h = min(wx, wy) / cells
            nx, ny = int(round(wx / h)), int(round(wy / h))
            x = wx + (np.arange(nx) + 0.5) * h
            y = wy + (np.arange(ny) + 0.5) * h
            X, Y = np.meshgrid(x, y, indexing="ij")
            phi = cutoff.evaluate(X, Y, domain, h)
            size = math.sqrt(min(wx, wy))
            dom = max(abs(float(H.coeff(A, B))) * 2.0 ** (j * A + k * B) for A, B in nd.vertices)
            osc = math.inf if lam == 0 else (lam * dom) ** (-1.0 / 6.0)
            if not np.any(phi):
                local = 0.0
            else:
                K = np.exp(1j * lam * S(X, Y)) * phi
                local = maximize_form(K, h, restarts, iters, rng).value
            rows.append(ProfileRow(j, k, local, size, osc, local > slack * min(size, osc)))
    return rows


# --------------------------------------------------------------------------
# shear

def shear_transform(S: BivarPoly) -> BivarPoly:
    """``S(u, v - u)`` in the variables ``(x, y) = (u, v)``."""
    return S.compose(BivarPoly.x(), BivarPoly.y() - BivarPoly.x())


def inverse_shear(T: BivarPoly) -> BivarPoly:
    """``T(x, x + y)``, undoing :func:`shear_transform`."""
    return T.compose(BivarPoly.x(), BivarPoly.x() + BivarPoly.y())


def sheared_hessian(T: BivarPoly) -> BivarPoly:
    """Hessian operator in sheared coordinates: ``d_u d_v (d_u + d_v) T``.

    For ``T = shear_transform(S)`` this equals ``H(u, v - u)`` with ``H`` the
    convolution Hessian of ``S``.
    """
    tuv = differentiate(differentiate(T, "x"), "y")
    return differentiate(tuv, "x") + differentiate(tuv, "y")


# --------------------------------------------------------------------------
# operator van der Corput

class SignChangeError(ValueError):
    pass


def check_shell(H: BivarPoly, omega: CurvedTrapezoid, mu: float, A: float, strips: int = 16) -> tuple[float, float]:
    """Verify ``mu <= |H| <= A mu`` on a rectangle cover of ``omega``; return the |H| range."""
    lo_all, hi_all = math.inf, 0.0
    signs = set()
    for r in omega.cover_rects(strips):
        try:
            lo, hi = range_on_rect(H, r)
        except EnclosureBudgetError as exc:
            lo, hi = exc.best
        if lo < 0 < hi:
            raise SignChangeError(f"H changes sign on {r.as_floats()} inside the region")
        signs.add(1 if hi > 0 else -1 if lo < 0 else 0)
        if {1, -1} <= signs:
            raise SignChangeError("H takes both signs inside the region")
        lo_abs, hi_abs = (lo, hi) if lo >= 0 else (-hi, -lo)
        lo_all, hi_all = min(lo_all, lo_abs), max(hi_all, hi_abs)
    tol = 1e-9 * max(1.0, mu)
    if lo_all < mu - tol or hi_all > A * mu + tol:
        raise ValueError(f"|H| ranges over [{lo_all:.4g}, {hi_all:.4g}], outside [mu, A mu] = [{mu:g}, {A * mu:g}]")
    return lo_all, hi_all


def restricted_kernel(grid: TrilinearGrid, lam: float, omega: CurvedTrapezoid) -> np.ndarray:
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    return grid.kernel(lam) * omega.contains(X, Y)


def vdc_bilinear_norm(S: BivarPoly, g, h, lam: float, omega: CurvedTrapezoid, mu: float,
                      grid: TrilinearGrid, A: float = 1.0) -> float:
    """``|| x -> sum_y e^{i lam S} g(y) h(x+y) phi chi_omega ||`` for given ``g``, ``h``."""
    check_shell(convolution_hessian(S), omega, mu, A)
    n = grid.n
    K = restricted_kernel(grid, lam, omega)
    out = grid.h * kernels.contract_first(K, _vec(g, n), _vec(h, 2 * n - 1))
    return grid.norm(out)


def vdc_maximized_norm(S: BivarPoly, lam: float, omega: CurvedTrapezoid, mu: float, grid: TrilinearGrid,
                       A: float = 1.0, restarts: int = 4, iters: int = 200, seed: int = 0) -> float:
    """Supremum of :func:`vdc_bilinear_norm` over unit ``g`` and ``h``.

    By duality this is the trilinear norm of the kernel restricted to ``omega``.
    """
    check_shell(convolution_hessian(S), omega, mu, A)
    grid.check_sampling(lam)
    K = restricted_kernel(grid, lam, omega)
    return maximize_form(K, grid.h, restarts, iters, np.random.default_rng(seed)).value


def vdc_envelope(lam: float, mu: float) -> float:
    return abs(lam * mu) ** (-1.0 / 6.0)
