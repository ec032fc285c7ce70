import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings

from oscint.newton import DegeneratePhaseError
from oscint.poly import BivarPoly, Rect, convolution_hessian, parse_poly
from oscint.trapezoid import CurvedTrapezoid
from oscint.trilinear import (CutoffSpec, SamplingError, SignChangeError, assemble_grid, decay_sweep,
                              dyadic_profile, extremizer_ratio, fit_slope, inverse_shear, maximize_form,
                              operator_norm, shear_transform, sheared_hessian, trilinear_apply,
                              vdc_bilinear_norm, vdc_envelope, vdc_maximized_norm)

import invariants
from conftest import polys
from oracles import X, Y, brute_bilinear_norm, brute_form, to_expr

x, y = BivarPoly.x(), BivarPoly.y()
CUBIC = x**2 * y - x * y**2
SQUARE = Rect(-1, 1, -1, 1)


def oracle_kernel(S, grid, lam):
    """Kernel rebuilt from a sympy evaluation of the phase."""
    f = sp.lambdify((X, Y), to_expr(S.terms), "numpy")
    XX, YY = np.meshgrid(grid.x, grid.y, indexing="ij")
    return np.exp(1j * lam * (f(XX, YY) + 0 * XX)) * grid.cutoff_samples


def random_vectors(rng, n):
    return [rng.standard_normal(k) + 1j * rng.standard_normal(k) for k in (n, n, 2 * n - 1)]


class TestGrid:
    def test_rejects_small_n(self):
        with pytest.raises(ValueError, match="32"):
            assemble_grid(CUBIC, "bump", SQUARE, 16)

    def test_rejects_rectangular_domain(self):
        with pytest.raises(ValueError, match="square"):
            assemble_grid(CUBIC, "bump", Rect(0, 1, 0, 2), 64)

    def test_rejects_support_on_outer_layers(self):
        table = np.ones((64, 64))
        with pytest.raises(ValueError, match="outer two"):
            assemble_grid(CUBIC, CutoffSpec(kind="table", table=table), SQUARE, 64)
        with pytest.raises(ValueError):
            assemble_grid(CUBIC, CutoffSpec(kind="bump", support=(-2, 1, -1, 1)), SQUARE, 64)

    def test_shared_lattice(self):
        g = assemble_grid(CUBIC, "bump", SQUARE, 64)
        a, b = 10, 37
        assert g.sum_lattice[a + b] == pytest.approx(g.x[a] + g.y[b], abs=1e-14)
        assert g.x[1] - g.x[0] == pytest.approx(g.h)

    def test_grid_is_read_only(self):
        g = assemble_grid(CUBIC, "bump", SQUARE, 64)
        with pytest.raises(ValueError):
            g.x[0] = 5.0

    def test_sampling_rule(self):
        g = assemble_grid(CUBIC, "bump", SQUARE, 64)
        with pytest.raises(SamplingError) as info:
            trilinear_apply(g, *random_vectors(np.random.default_rng(0), 64), 2.0**14)
        assert info.value.n_min > 64

    def test_separated_terms_do_not_raise_sampling_demand(self):
        g1 = assemble_grid(CUBIC, "bump", SQUARE, 64)
        g2 = assemble_grid(CUBIC + x**7 + (x + y) ** 5, "bump", SQUARE, 64)
        assert g1.min_points(100.0) == g2.min_points(100.0)


class TestTrilinearApply:
    def test_zero_phase_full_indicator(self):
        """Constant data: the sum counts cells of the cutoff, area (1 - 4/n)^2 of the unit square."""
        n = 64
        table = np.zeros((n, n))
        table[2:-2, 2:-2] = 1.0
        g = assemble_grid(BivarPoly(), CutoffSpec(kind="table", table=table), Rect(0, 1, 0, 1), n)
        val = trilinear_apply(g, np.ones(n), np.ones(n), np.ones(2 * n - 1), 0.0)
        assert val.real == pytest.approx((1 - 4 / n) ** 2, rel=1e-12)
        assert abs(val - 1) <= 8 / n

    @pytest.mark.parametrize("lam", [0.0, 0.7, 2.0])
    def test_matches_brute_force(self, lam, rng):
        S = parse_poly("x^3*y - 2*x*y^2 + y^3/3")
        g = assemble_grid(S, "bump", SQUARE, 64)
        f1, f2, f3 = random_vectors(rng, 64)
        ref = g.h**2 * brute_form(oracle_kernel(S, g, lam), f1, f2, f3)
        assert trilinear_apply(g, f1, f2, f3, lam) == pytest.approx(ref, rel=1e-12)

    def test_fft_equivalence(self):
        assert invariants.fft_equivalence_error() <= 1e-10

    def test_strip_bound(self):
        bad, worst = invariants.strip_bound_violations(trials=200)
        assert bad == 0 and worst <= 1

    @staticmethod
    def _refined(cutoff, n):
        g = assemble_grid(CUBIC, cutoff, SQUARE, n)
        fs = [np.exp(-4 * (t - 0.1) ** 2) * (1 + 0.5j * t) for t in (g.x, g.y, g.sum_lattice)]
        return trilinear_apply(g, *fs, 2.0)

    def test_refinement_cauchy(self):
        # smooth integrand on a box aligned with cell edges at every n: plain midpoint rule
        box = CutoffSpec(kind="indicator", support=(-0.5, 0.5, -0.5, 0.5))
        v1, v2, v4 = (self._refined(box, n) for n in (64, 128, 256))
        assert abs(v1 - v2) <= 8 * abs(v2 - v4) + 1e-8
        assert abs(v2 - v4) <= abs(v1 - v2) / 3

    def test_refinement_with_bump_is_faster_than_second_order(self):
        # a C2 bump kills the boundary terms, so the differences shrink by about 16
        v1, v2, v4 = (self._refined("bump", n) for n in (64, 128, 256))
        assert abs(v2 - v4) <= abs(v1 - v2) / 8

    def test_shear_relabelling(self, rng):
        """Summing over (a, a + b) with the third function at index a + b is the same sum."""
        S = parse_poly("x^2*y + y^3")
        g = assemble_grid(S, "bump", SQUARE, 48)
        f1, f2, f3 = random_vectors(rng, 48)
        K = g.kernel(3.0)
        n = g.n
        sheared = np.zeros((n, 2 * n - 1), dtype=complex)
        for a in range(n):
            sheared[a, a:a + n] = K[a]
        total = sum(sheared[a, c] * f1[a] * f2[c - a] * f3[c]
                    for a in range(n) for c in range(a, a + n))
        assert g.h**2 * total == pytest.approx(trilinear_apply(g, f1, f2, f3, 3.0), rel=1e-12)


class TestNormEstimation:
    def test_ascent_is_monotone(self):
        assert invariants.ascent_violations(trials=5) == 0

    def test_rank_one_kernel_is_exact(self, rng):
        # K = u v^T with f3 free: the supremum factorises
        u = rng.uniform(0.5, 1.0, 16)
        v = rng.uniform(0.5, 1.0, 16)
        K = np.outer(u, v).astype(complex)
        est = maximize_form(K, 1.0, restarts=4, iters=200, rng=rng)
        ones = np.ones(31)
        brute = [abs(brute_form(K, a, b, ones)) for a, b in [(u / np.linalg.norm(u), v / np.linalg.norm(v))]]
        assert est.value >= brute[0] / math.sqrt(31) - 1e-12
        assert est.value <= np.linalg.norm(u) * np.linalg.norm(v) + 1e-9

    def test_lower_bound_by_any_unit_vectors(self, rng):
        g = assemble_grid(CUBIC, "bump", SQUARE, 64)
        est = operator_norm(g, 4.0, restarts=4, iters=100, rng=rng, details=True)
        for _ in range(5):
            fs = random_vectors(rng, 64)
            fs = [f / g.norm(f) for f in fs]
            assert abs(trilinear_apply(g, *fs, 4.0)) <= est.value + 1e-12
        # any cutoff bounded by 1 on a strip of width 2 caps the norm at sqrt(2)
        assert est.value <= math.sqrt(2) * (1 + 4 / 64)

    def test_restarts_floor(self):
        g = assemble_grid(CUBIC, "bump", SQUARE, 64)
        with pytest.raises(ValueError):
            operator_norm(g, 1.0, restarts=2)

    def test_discretisation_stability(self):
        dom = Rect(0, 1, 0, 1)
        for S in (CUBIC, x**3 * y * Fraction(1, 6)):
            a = operator_norm(assemble_grid(S, "bump", dom, 256), 2.0**8, restarts=4, iters=200, rng=0)
            b = operator_norm(assemble_grid(S, "bump", dom, 512), 2.0**8, restarts=4, iters=200, rng=0)
            assert abs(a - b) <= 0.05 * b

    def test_zero_frequency_norm(self):
        """At lam = 0 with a flat indicator the norm sits between the box test and sqrt(width)."""
        g = assemble_grid(BivarPoly(), CutoffSpec(kind="indicator", support=(0.25, 0.75, 0.25, 0.75)),
                          Rect(0, 1, 0, 1), 64)
        val = operator_norm(g, 0.0, restarts=4, iters=200, rng=1)
        assert 0.5 * math.sqrt(0.5) - 0.05 <= val <= math.sqrt(0.5) * (1 + 4 / 64)


class TestExtremizer:
    def test_small_frequency_closed_form(self):
        g = assemble_grid(CUBIC, "bump", SQUARE, 1024)
        lam = 1e-6
        c0 = 0.1 * lam ** (1 / 3)
        w = c0 * lam ** (-1 / 3)
        ratio = extremizer_ratio(CUBIC, 0, lam, c0, g)
        assert ratio == pytest.approx(math.sqrt(w) / 2, rel=0.05)

    def test_requires_cutoff_at_origin(self):
        g = assemble_grid(CUBIC, "bump", Rect(0, 1, 0, 1), 256)
        with pytest.raises(ValueError, match="origin"):
            extremizer_ratio(CUBIC, 0, 2.0**8, 1.0, g)

    def test_degenerate_phase(self):
        g = assemble_grid(x**3, "bump", SQUARE, 256)
        with pytest.raises(DegeneratePhaseError):
            extremizer_ratio(x**3, 0, 2.0**8, 1.0, g)


class TestDecaySweep:
    def test_degenerate_refused(self):
        with pytest.raises(DegeneratePhaseError, match="no decay"):
            decay_sweep((x + y) ** 3 + x**3 - y**3, "bump", [2.0**k for k in range(8, 13)], n=64)

    @pytest.mark.parametrize("lams", [[1, 2, 4, 8], [1, 2, 4, 8, 20], [1, 2, 4, 8, 8]])
    def test_lambda_validation(self, lams):
        with pytest.raises(ValueError):
            decay_sweep(CUBIC, "bump", lams, n=64)

    def test_small_sweep(self):
        sw = decay_sweep(CUBIC, "bump", [2.0**k for k in range(2, 7)], n=256, restarts=4, iters=100,
                         domain=Rect(0, 1, 0, 1), probe_domain=Rect(Fraction(-1, 2), Fraction(1, 2),
                                                                   Fraction(-1, 2), Fraction(1, 2)))
        assert len(sw.norms) == 5 and all(v > 0 for v in sw.norms)
        assert sw.monotone_within(0.05)
        assert sw.theory_slope == Fraction(-1, 6)

    def test_fit_slope_exact_power(self):
        lams = [2.0**k for k in range(8, 15)]
        assert fit_slope(lams, [v ** -0.25 for v in lams]) == pytest.approx(-0.25)


class TestProfile:
    def test_envelopes(self):
        rows = dyadic_profile(CUBIC, 2.0**8, range(-4, -1), range(-4, -1), cells=32, restarts=4, iters=60)
        assert len(rows) == 9
        assert not any(r.flagged for r in rows)
        for r in rows:
            assert r.size_bound == pytest.approx(2.0 ** (min(r.j, r.k) / 2))

    def test_zero_frequency(self):
        (row,) = dyadic_profile(CUBIC, 0.0, [-2], [-2], cells=16, restarts=4, iters=40)
        assert math.isinf(row.osc_bound)

    def test_box_outside_support(self):
        (row,) = dyadic_profile(CUBIC, 2.0**8, [1], [1], cells=16)
        assert row.local_norm == 0.0


class TestShear:
    def test_example(self):
        assert shear_transform(x * y) == x * y - x**2

    @given(polys(max_degree=8))
    @settings(max_examples=40)
    def test_inverse(self, S):
        assert inverse_shear(shear_transform(S)) == S
        assert shear_transform(inverse_shear(S)) == S

    @given(polys(max_degree=8))
    @settings(max_examples=40)
    def test_sheared_hessian_is_hessian_in_new_coordinates(self, S):
        H = convolution_hessian(S)
        assert sheared_hessian(shear_transform(S)) == H.compose(x, y - x)

    def test_order_invariance(self):
        bad, checked = invariants.shear_order_violations(count=30)
        assert bad == 0 and checked == 30

    def test_plain_hessian_of_sheared_phase_is_not_invariant(self):
        # the unsheared operator sees (y - x)^4 as non-degenerate
        S = y**4
        assert convolution_hessian(S).is_zero()
        assert not convolution_hessian(shear_transform(S)).is_zero()


class TestVanDerCorput:
    def test_zero_input(self):
        g = assemble_grid(CUBIC, "bump", SQUARE, 64)
        omega = CurvedTrapezoid.box(-0.5, 0.5, -0.5, 0.5)
        assert vdc_bilinear_norm(CUBIC, np.zeros(64), np.ones(127), 4.0, omega, 4.0, g) == 0.0

    def test_zero_frequency_brute_force(self, rng):
        n = 32
        g = assemble_grid(CUBIC, "bump", SQUARE, n)
        omega = CurvedTrapezoid.box(-0.6, 0.4, -0.3, 0.7)
        gv = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        hv = rng.standard_normal(2 * n - 1)
        XX, YY = np.meshgrid(g.x, g.y, indexing="ij")
        K = g.cutoff_samples * omega.contains(XX, YY)
        ref = brute_bilinear_norm(K, gv, hv, g.h)
        got = vdc_bilinear_norm(CUBIC, gv, hv, 0.0, omega, 4.0, g)
        assert got == pytest.approx(ref, rel=1e-12)
        assert got <= g.norm(gv) * g.norm(hv) * 1.0 + 1e-12

    def test_sign_change_rejected(self):
        S = x**3 * y * Fraction(1, 6)
        g = assemble_grid(S, "bump", SQUARE, 64)
        omega = CurvedTrapezoid.box(-0.5, 0.5, 0.1, 0.5)
        with pytest.raises(SignChangeError):
            vdc_bilinear_norm(S, np.ones(64), np.ones(127), 1.0, omega, 0.1, g, A=10.0)

    def test_shell_violation_rejected(self):
        S = x**3 * y * Fraction(1, 6)
        g = assemble_grid(S, "bump", SQUARE, 64)
        omega = CurvedTrapezoid.box(0.1, 0.5, 0.1, 0.5)
        with pytest.raises(ValueError, match="outside"):
            vdc_bilinear_norm(S, np.ones(64), np.ones(127), 1.0, omega, 0.2, g, A=1.5)

    @pytest.mark.slow
    def test_envelope_ratio_bounded(self):
        g = assemble_grid(CUBIC, "bump", SQUARE, 1024)
        omega = CurvedTrapezoid.box(-0.75, 0.75, -0.75, 0.75)
        lams = [2.0**k for k in (8, 10, 12)]
        scaled = [vdc_maximized_norm(CUBIC, lam, omega, 4.0, g, iters=80) / vdc_envelope(lam, 4.0) for lam in lams]
        assert max(scaled) <= 4 * min(scaled)
