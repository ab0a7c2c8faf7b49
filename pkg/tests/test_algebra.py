"""Cl(n) arithmetic against a brute-force generator-string oracle."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cliffrac.algebra import (
    Multivector,
    algebra,
    blade_from_indices,
    blade_indices,
    blade_product,
    paravector,
    paravector_inverse,
)


def oracle_blade_product(a_indices, b_indices):
    """Reduce the concatenated generator string by bubble sort, counting sign.

    Every adjacent transposition of distinct generators flips the sign;
    adjacent equal generators annihilate with a -1 (e_i^2 = -1).
    """
    seq = list(a_indices) + list(b_indices)
    sign = 1
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(seq) - 1:
            if seq[i] == seq[i + 1]:
                del seq[i : i + 2]
                sign = -sign
                changed = True
            elif seq[i] > seq[i + 1]:
                seq[i], seq[i + 1] = seq[i + 1], seq[i]
                sign = -sign
                changed = True
            else:
                i += 1
    return sign, tuple(seq)


def oracle_mv_mul(n, x, y):
    """Expand the product blade-by-blade through the string oracle."""
    out = np.zeros(1 << n)
    for a in range(1 << n):
        if x[a] == 0:
            continue
        for b in range(1 << n):
            if y[b] == 0:
                continue
            sign, blades = oracle_blade_product(blade_indices(a), blade_indices(b))
            out[blade_from_indices(blades)] += sign * x[a] * y[b]
    return out


def mv(n, **kw):
    """Convenience: mv(2, s=1, e1=2, e12=-1)."""
    c = np.zeros(1 << n)
    for key, value in kw.items():
        c[0 if key == "s" else blade_from_indices(int(ch) for ch in key[1:])] = value
    return Multivector(n, c)


class TestBladeProduct:
    def test_distinct_generators(self):
        assert blade_product(blade_from_indices({1}), blade_from_indices({2})) == (
            1,
            blade_from_indices({1, 2}),
        )

    def test_square_is_minus_one(self):
        assert blade_product(blade_from_indices({1}), blade_from_indices({1})) == (-1, 0)

    def test_bivector_times_vector(self):
        # e12 * e2 = -e1
        assert blade_product(blade_from_indices({1, 2}), blade_from_indices({2})) == (
            -1,
            blade_from_indices({1}),
        )

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            blade_product(blade_from_indices({4}), 0, n=3)

    def test_matches_oracle_exhaustively(self):
        for n in (1, 2, 3):
            for a in range(1 << n):
                for b in range(1 << n):
                    sign, mask = blade_product(a, b)
                    osign, oblades = oracle_blade_product(blade_indices(a), blade_indices(b))
                    assert (sign, mask) == (osign, blade_from_indices(oblades))


class TestMul:
    def test_distributivity_example(self):
        a = mv(2, s=1, e1=1)
        b = mv(2, e2=1)
        assert (a * b).isclose(mv(2, e2=1, e12=1))

    def test_bivector_square(self):
        assert (mv(2, e12=1) * mv(2, e12=1)).isclose(mv(2, s=-1))

    def test_unit_element(self):
        rng = np.random.default_rng(0)
        a = Multivector(3, rng.normal(size=8))
        assert (a * Multivector.scalar(3, 1.0)).isclose(a)
        assert (Multivector.scalar(3, 1.0) * a).isclose(a)

    def test_random_against_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            x = rng.normal(size=8)
            y = rng.normal(size=8)
            got = (Multivector(3, x) * Multivector(3, y)).coeffs
            np.testing.assert_allclose(got, oracle_mv_mul(3, x, y), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mv(2, s=1) * mv(3, s=1)

    def test_anticommutation_exact(self):
        for n in (2, 3, 4):
            for i in range(1, n + 1):
                for j in range(1, n + 1):
                    if i == j:
                        continue
                    ei, ej = Multivector.basis(n, {i}), Multivector.basis(n, {j})
                    assert np.array_equal((ei * ej).coeffs, -(ej * ei).coeffs)

    def test_associativity_1000_random_triples(self):
        rng = np.random.default_rng(2)
        for n in (2, 3, 4):
            dim = 1 << n
            A = rng.normal(size=(1000, dim))
            B = rng.normal(size=(1000, dim))
            C = rng.normal(size=(1000, dim))
            alg = algebra(n)
            left = alg.mul(alg.mul(A, B), C)
            right = alg.mul(A, alg.mul(B, C))
            scale = (
                np.linalg.norm(A, axis=1)
                * np.linalg.norm(B, axis=1)
                * np.linalg.norm(C, axis=1)
            )
            assert np.all(
                np.linalg.norm(left - right, axis=1) <= 1e-12 * scale
            )


class TestConjugate:
    def test_vector(self):
        assert mv(2, e1=1).conjugate().isclose(mv(2, e1=-1))

    def test_bivector(self):
        # (-1)^2 e2 e1 = -e12
        assert mv(2, e12=1).conjugate().isclose(mv(2, e12=-1))

    def test_scalar_fixed(self):
        assert mv(2, s=1).conjugate().isclose(mv(2, s=1))

    @given(st.integers(1, 4), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_involution_and_antihomomorphism(self, n, seed):
        rng = np.random.default_rng(seed)
        a = Multivector(n, rng.normal(size=1 << n))
        b = Multivector(n, rng.normal(size=1 << n))
        assert a.conjugate().conjugate().isclose(a)
        lhs = (a * b).conjugate()
        rhs = b.conjugate() * a.conjugate()
        assert np.allclose(lhs.coeffs, rhs.coeffs, atol=1e-12 * (1 + a.norm() * b.norm()))


class TestNormAndParavectors:
    def test_norm_examples(self):
        assert mv(2, s=1, e1=1).norm() == pytest.approx(np.sqrt(2))
        assert Multivector.zero(2).norm() == 0.0
        x, y = mv(2, e1=1), mv(2, e2=1)
        assert (x * y).norm() == pytest.approx(x.norm() * y.norm())

    @given(st.integers(1, 4), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_paravector_norm_multiplicative(self, n, seed):
        rng = np.random.default_rng(seed)
        x = paravector(rng.normal(size=n + 1)).to_multivector()
        y = paravector(rng.normal(size=n + 1)).to_multivector()
        assert abs((x * y).norm() - x.norm() * y.norm()) <= 1e-12 * x.norm() * y.norm()

    @given(st.integers(1, 4), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_x_conj_x_is_scalar(self, n, seed):
        rng = np.random.default_rng(seed)
        x = paravector(rng.normal(size=n + 1))
        prod = x.to_multivector() * x.to_multivector().conjugate()
        assert prod.coeffs[0] == pytest.approx(x.norm() ** 2)
        # exact cancellation: signs of paired terms are symbolic
        assert np.all(prod.coeffs[1:] == 0.0)

    def test_inverse_identity(self):
        assert paravector_inverse(paravector(1.0, 0.0, 0.0)).isclose(Multivector.scalar(2, 1.0))

    def test_inverse_pure_vector(self):
        assert paravector_inverse(paravector(0.0, 1.0, 0.0)).isclose(mv(2, e1=-1))

    def test_inverse_34(self):
        x = paravector(3.0, 4.0)
        inv = paravector_inverse(x)
        assert inv.isclose(mv(1, s=3 / 25, e1=-4 / 25))
        assert (x.to_multivector() * inv).isclose(Multivector.scalar(1, 1.0), tol=1e-14)

    def test_zero_paravector_raises(self):
        with pytest.raises(ZeroDivisionError):
            paravector_inverse(paravector(0.0, 0.0))


class TestSerialization:
    def test_round_trip(self):
        a = mv(2, s=0.5, e1=-1.25, e12=3.0)
        b = Multivector.from_json(a.to_json())
        assert b.n == a.n and b.isclose(a, tol=0)

    def test_key_format(self):
        d = json.loads(mv(2, s=1.0, e12=2.0).to_json())
        assert d["n"] == 2
        assert d["coeffs"][""] == 1.0
        assert d["coeffs"]["12"] == 2.0
