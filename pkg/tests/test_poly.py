from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oscint.poly import (BivarPoly, EnclosureBudgetError, Rect, abs_sup_batch, convolution_hessian, differentiate,
                         enclose_batch, evaluate, format_poly, is_degenerate, parse_poly, range_on_rect)

from conftest import compose_univariate, polys, small_fraction, univariate
from oracles import hessian_terms, sampled_range

x, y = BivarPoly.x(), BivarPoly.y()


class TestArithmetic:
    def test_no_zero_coefficients_stored(self):
        p = BivarPoly({(1, 0): 2, (0, 1): 0, (2, 2): Fraction(0)})
        assert p.terms == {(1, 0): 2}
        assert (x - x).terms == {}
        assert (x - x).degree == 0

    @given(polys(), polys())
    def test_ring_laws(self, p, q):
        assert p + q == q + p
        assert p * q == q * p
        assert (p + q) - q == p
        assert all(c != 0 for c in (p * q).terms.values())

    @given(polys())
    def test_degree_matches_support(self, p):
        assert p.degree == max((a + b for a, b in p.terms), default=0)

    def test_parse_and_format(self):
        assert parse_poly("x^2*y - x*y^2") == x**2 * y - x * y**2
        assert parse_poly("3/2 * x ** 2") == BivarPoly({(2, 0): Fraction(3, 2)})
        assert parse_poly("(x+y)^3/6") == (x + y) ** 3 * Fraction(1, 6)
        with pytest.raises(ValueError):
            parse_poly("x^-1")
        with pytest.raises(ValueError):
            parse_poly("z + 1")
        with pytest.raises(ValueError):
            parse_poly("x / y")

    @given(polys())
    def test_format_round_trip(self, p):
        assert parse_poly(format_poly(p)) == p


class TestDifferentiate:
    def test_power_rule(self):
        s = x**3 * y**2
        assert differentiate(s, "x") == 3 * x**2 * y**2
        assert differentiate(s, "y", 2) == 2 * x**3
        assert differentiate(BivarPoly.const(5), "x").is_zero()

    @given(polys(), st.sampled_from("xy"), st.integers(0, 3))
    def test_matches_sympy(self, p, axis, times):
        import sympy as sp
        from oracles import X, Y, from_expr, to_expr

        expected = from_expr(sp.diff(to_expr(p.terms), X if axis == "x" else Y, times)) if times else p.terms
        assert differentiate(p, axis, times).terms == expected


class TestHessian:
    def test_examples(self):
        assert convolution_hessian(x**2 * y - x * y**2) == BivarPoly.const(4)
        assert convolution_hessian((x + y) ** 3 + x**3 - y**3).is_zero()
        assert convolution_hessian(x**3 * y * Fraction(1, 6)) == x
        assert convolution_hessian(x**3 * y**2) == 12 * x * y - 6 * x**2

    def test_degeneracy(self):
        assert is_degenerate(x**3 + y**3)
        assert is_degenerate((x + y) ** 5)
        assert not is_degenerate(x**2 * y - x * y**2)

    @given(polys(max_degree=8))
    def test_matches_symbolic_oracle(self, S):
        assert convolution_hessian(S).terms == hessian_terms(S.terms)

    @given(polys(max_degree=8), polys(max_degree=8), small_fraction, small_fraction)
    def test_linearity(self, S1, S2, a, b):
        lhs = convolution_hessian(S1 * a + S2 * b)
        rhs = convolution_hessian(S1) * a + convolution_hessian(S2) * b
        assert lhs == rhs

    @given(univariate(10), univariate(10), univariate(10))
    def test_kernel_contains_separated_sums(self, p, q, r):
        S = compose_univariate(p, x) + compose_univariate(q, y) + compose_univariate(r, x + y)
        assert convolution_hessian(S).is_zero()


class TestEvaluate:
    def test_examples(self):
        assert evaluate(x**2 * y, 2, 3) == 12
        assert evaluate(BivarPoly(), 0.3, -2) == 0
        assert evaluate(y**2 - x**3, 1, 1) == 0

    @given(polys(max_degree=6), st.floats(-2, 2), st.floats(-2, 2))
    def test_matches_exact_value(self, p, a, b):
        exact = sum(c * Fraction(a) ** i * Fraction(b) ** j for (i, j), c in p.terms.items())
        scale = sum(abs(c) * 2 ** (i + j) for (i, j), c in p.terms.items()) + 1
        assert abs(p(a, b) - float(exact)) <= 1e-12 * float(scale)

    def test_vectorised(self):
        xs = np.linspace(-1, 1, 7)
        np.testing.assert_allclose((x * y + 1)(xs, 2 * xs), 2 * xs**2 + 1)


class TestRangeOnRect:
    def test_linear_exact(self):
        assert range_on_rect(x, Rect(0, 1, 0, 1)) == (0.0, 1.0)

    def test_bilinear_monotone(self):
        lo, hi = range_on_rect(x * y, Rect(1, 2, 1, 2))
        assert lo == pytest.approx(1) and hi == pytest.approx(4)
        assert lo <= 1 and hi >= 4

    def test_cusp_within_tolerance(self):
        p = y**2 - x**3
        lo, hi = range_on_rect(p, Rect(0, 1, 0, 1), tol=1e-6)
        s_lo, s_hi = sampled_range(p, (0, 1, 0, 1), 401)
        assert lo <= s_lo and hi >= s_hi
        assert lo == pytest.approx(-1, abs=1e-6) and hi == pytest.approx(1, abs=1e-6)

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            range_on_rect(x, Rect(0, 1, 0, 1), tol=0)

    def test_budget_error_carries_best(self):
        p = (x - Fraction(1, 3)) ** 2 * (y - Fraction(2, 7)) ** 2 + x * y * Fraction(1, 1000)
        with pytest.raises(EnclosureBudgetError) as info:
            range_on_rect(p, Rect(0, 1, 0, 1), tol=1e-15, budget=8)
        lo, hi = info.value.best
        assert lo <= 0 <= hi

    @given(polys(max_degree=6, min_terms=1),
           st.tuples(small_fraction, small_fraction, st.fractions(1, 3, max_denominator=4), st.fractions(1, 3, max_denominator=4)))
    def test_encloses_samples(self, p, box):
        x0, y0, w, v = box
        r = Rect(x0, x0 + w, y0, y0 + v)
        lo, hi = range_on_rect(p, r)
        s_lo, s_hi = sampled_range(p, r.as_floats(), 100)
        slack = 1e-9 * max(1.0, abs(s_lo), abs(s_hi))
        assert lo <= s_lo + slack and hi >= s_hi - slack
        assert hi - s_hi <= 1e-6 * max(1.0, abs(hi)) + (s_hi - s_lo) * 1e-3

    @given(polys(max_degree=5, min_terms=1))
    def test_subdivision_consistency(self, p):
        r = Rect(Fraction(-1, 2), Fraction(3, 4), Fraction(0), Fraction(1))
        lo, hi = range_on_rect(p, r)
        parts = [range_on_rect(p, q) for q in r.quarters()]
        tol = 2e-6 * max(1.0, abs(lo), abs(hi))
        assert min(a for a, _ in parts) >= lo - tol
        assert max(b for _, b in parts) <= hi + tol


class TestBatchEnclosures:
    @given(polys(max_degree=6, min_terms=1), st.integers(1, 4))
    def test_batch_encloses_samples(self, p, sub):
        rects = np.array([[-1, -0.5, 0, 0.25], [0.1, 0.6, -0.9, 0.3], [0.5, 2.0, 1.0, 1.5]])
        lo, hi = enclose_batch(p.coeff_array(), rects, sub)
        for r, a, b in zip(rects, lo, hi):
            s_lo, s_hi = sampled_range(p, r, 60)
            slack = 1e-9 * max(1.0, abs(s_lo), abs(s_hi))
            assert a <= s_lo + slack and b >= s_hi - slack

    def test_abs_sup_bracket(self):
        p = y**2 - x**3
        rects = np.array([[0.0, 1.0, 0.0, 1.0], [0.2, 0.3, 0.1, 0.15]])
        lo, hi = abs_sup_batch(p.coeff_array(), rects, 4)
        for r, a, b in zip(rects, lo, hi):
            s_lo, s_hi = sampled_range(p, r, 101)
            true = max(abs(s_lo), abs(s_hi))
            assert a <= true + 1e-12 <= b + 2e-12

    def test_finer_cells_tighten(self):
        p = (x - y) ** 3 + x * y
        rect = np.array([[-1.0, 1.0, -1.0, 1.0]])
        w1 = np.subtract(*enclose_batch(p.coeff_array(), rect, 1)[::-1])
        w8 = np.subtract(*enclose_batch(p.coeff_array(), rect, 8)[::-1])
        assert w8[0] <= w1[0]
