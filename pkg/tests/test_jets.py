"""Truncated Taylor arithmetic against sympy and direct expansions."""

import math

import numpy as np
import pytest
import sympy as sp

from cliffrac.jets import TaylorJet, mi_factorial, mi_power, multi_indices


def sympy_jet(expr, symbols, point, order):
    """Oracle: Taylor coefficients of expr at point via symbolic derivatives."""
    out = {}
    for l in multi_indices(len(symbols), order):
        d = expr
        for s, e in zip(symbols, l):
            d = sp.diff(d, s, e)
        val = float(d.subs(dict(zip(symbols, point))))
        out[l] = val / mi_factorial(l)
    return out


def assert_matches(jet, oracle, tol=1e-10):
    for l, v in oracle.items():
        assert jet.coefficient(l) == pytest.approx(v, abs=tol * (1 + abs(v)))


class TestBasics:
    def test_multi_indices_count(self):
        # |{l in N^d : |l| <= m}| = C(d + m, d)
        assert len(multi_indices(2, 3)) == math.comb(5, 2)
        assert len(multi_indices(3, 2)) == math.comb(5, 3)

    def test_mi_power(self):
        base = np.array([[2.0, 3.0], [1.0, -1.0]])
        np.testing.assert_allclose(mi_power(base, (2, 1)), [12.0, -1.0])

    def test_linear_and_add(self):
        j = TaylorJet.linear(2, 3, 5.0, 0) + TaylorJet.linear(2, 3, 0.0, 1, slope=2.0)
        assert j.value() == 5.0
        assert j.coefficient((1, 0)) == 1.0
        assert j.coefficient((0, 1)) == 2.0

    def test_derivative_factor(self):
        j = TaylorJet(2, 4, {(2, 1): 3.0})
        assert j.derivative((2, 1)) == 3.0 * 2

    def test_order_guard(self):
        with pytest.raises(ValueError):
            TaylorJet.constant(2, 2, 1.0).derivative((3, 0))


class TestProducts:
    def test_polynomial_product(self):
        x, y = sp.symbols("x y")
        p = (1 + 2 * x - y) * (x * y + 3)
        jx = TaylorJet.linear(2, 4, 0.5, 0)
        jy = TaylorJet.linear(2, 4, -1.0, 1)
        got = (1 + 2 * jx - jy) * (jx * jy + 3)
        assert_matches(got, sympy_jet(p, (x, y), (0.5, -1.0), 4))

    def test_truncation(self):
        j = TaylorJet.linear(1, 2, 0.0, 0)
        cubed = j.power(3)
        assert cubed.terms.get((3,), 0.0) == 0.0  # beyond order 2

    def test_reciprocal(self):
        x, y = sp.symbols("x y")
        expr = 1 / (2 + x + x * y)
        jx = TaylorJet.linear(2, 4, 0.3, 0)
        jy = TaylorJet.linear(2, 4, 0.7, 1)
        got = (2 + jx + jx * jy).reciprocal()
        assert_matches(got, sympy_jet(expr, (x, y), (0.3, 0.7), 4))

    def test_exp(self):
        x = sp.symbols("x")
        expr = sp.exp(x**2 - x)
        jx = TaylorJet.linear(1, 5, 0.4, 0)
        got = (jx * jx - jx).exp()
        assert_matches(got, sympy_jet(expr, (x,), (0.4,), 5))

    def test_bump_profile_derivatives(self):
        # psi(s) = exp(1 - 1/(1 - s^2)), the partition bump used downstream
        s = sp.symbols("s")
        expr = sp.exp(1 - 1 / (1 - s**2))
        for s0 in (0.0, 0.35, -0.8):
            js = TaylorJet.linear(1, 4, s0, 0)
            got = (1 - (1 - js * js).reciprocal()).exp()
            assert_matches(got, sympy_jet(expr, (s,), (s0,), 4), tol=1e-8)


class TestArrayValues:
    def test_batched_coefficients(self):
        const = np.array([1.0, 2.0, 3.0])
        j = TaylorJet.linear(1, 3, const, 0, slope=np.ones(3))
        sq = j * j
        np.testing.assert_allclose(sq.value(), const**2)
        np.testing.assert_allclose(sq.coefficient((1,)), 2 * const)
        np.testing.assert_allclose(sq.coefficient((2,)), np.ones(3))

    def test_evaluate(self):
        j = TaylorJet.linear(2, 3, 1.0, 0) * TaylorJet.linear(2, 3, 2.0, 1)
        offs = np.array([[0.1, -0.2], [0.0, 0.0]])
        np.testing.assert_allclose(j.evaluate(offs), [(1.1) * (1.8), 2.0])
