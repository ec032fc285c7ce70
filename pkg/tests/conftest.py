from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from oscint.poly import BivarPoly

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

small_fraction = st.fractions(min_value=-8, max_value=8, max_denominator=6)
nonzero_fraction = small_fraction.filter(bool)


@st.composite
def polys(draw, max_degree: int = 8, max_terms: int = 8, min_terms: int = 0):
    """Random bivariate polynomials with small rational coefficients."""
    exps = st.tuples(st.integers(0, max_degree), st.integers(0, max_degree)).filter(
        lambda e: e[0] + e[1] <= max_degree)
    terms = draw(st.dictionaries(exps, nonzero_fraction, min_size=min_terms, max_size=max_terms))
    return BivarPoly(terms)


@st.composite
def univariate(draw, max_degree: int = 10):
    return [draw(small_fraction) for _ in range(draw(st.integers(0, max_degree)) + 1)]


def compose_univariate(coeffs, arg: BivarPoly) -> BivarPoly:
    out = BivarPoly()
    power = BivarPoly.const(1)
    for c in coeffs:
        out = out + power * BivarPoly.const(Fraction(c))
        power = power * arg
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
