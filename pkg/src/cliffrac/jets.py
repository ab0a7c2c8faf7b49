"""Truncated multivariate Taylor arithmetic.

A TaylorJet stores the coefficients of a function's Taylor expansion around
a base point, truncated at a total order: terms maps a multi-index l to the
coefficient of (x - x0)^l. Coefficients may be scalars or numpy arrays (for
batched evaluation or algebra-valued functions); products assume at least
one factor is real-valued, so the commutative Cauchy product applies.

Derivatives fall out as partial^l f = l! * terms[l].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def multi_indices(dim: int, max_order: int) -> list:
    """All multi-indices of length dim with |l| <= max_order, lexicographic."""
    if dim == 0:
        return [()]
    out = []
    for head in range(max_order + 1):
        for tail in multi_indices(dim - 1, max_order - head):
            out.append((head,) + tail)
    return sorted(out, key=lambda l: (sum(l), l))


def mi_factorial(l) -> int:
    out = 1
    for e in l:
        out *= math.factorial(e)
    return out


def mi_add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def mi_power(base: np.ndarray, l) -> np.ndarray:
    """Componentwise power product base^l along the last axis."""
    b = np.asarray(base, dtype=np.float64)
    out = np.ones(b.shape[:-1])
    for ax, e in enumerate(l):
        if e:
            out = out * b[..., ax] ** e
    return out


@dataclass
class TaylorJet:
    dim: int
    order: int
    terms: dict = field(default_factory=dict)

    @staticmethod
    def constant(dim: int, order: int, value) -> "TaylorJet":
        return TaylorJet(dim, order, {(0,) * dim: value})

    @staticmethod
    def linear(dim: int, order: int, const, ax: int, slope=1.0) -> "TaylorJet":
        """The affine function const + slope * (x - x0)_ax."""
        terms = {(0,) * dim: const}
        if order >= 1:
            unit = tuple(1 if i == ax else 0 for i in range(dim))
            terms[unit] = slope
        return TaylorJet(dim, order, terms)

    def _zero(self):
        return TaylorJet(self.dim, self.order, {})

    def copy(self) -> "TaylorJet":
        return TaylorJet(self.dim, self.order, dict(self.terms))

    def value(self):
        return self.terms.get((0,) * self.dim, 0.0)

    def coefficient(self, l):
        return self.terms.get(tuple(l), 0.0)

    def derivative(self, l):
        """partial^l of the underlying function at the base point."""
        if sum(l) > self.order:
            raise ValueError(f"requested order {sum(l)} beyond truncation {self.order}")
        return self.coefficient(l) * mi_factorial(l)

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, TaylorJet):
            for l, v in other.terms.items():
                out.terms[l] = out.terms.get(l, 0.0) + v
        else:
            z = (0,) * self.dim
            out.terms[z] = out.terms.get(z, 0.0) + other
        return out

    __radd__ = __add__

    def __neg__(self):
        return TaylorJet(self.dim, self.order, {l: -v for l, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, TaylorJet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TaylorJet):
            return TaylorJet(self.dim, self.order, {l: v * other for l, v in self.terms.items()})
        out = self._zero()
        for la, va in self.terms.items():
            ra = self.order - sum(la)
            for lb, vb in other.terms.items():
                if sum(lb) > ra:
                    continue
                c = mi_add(la, lb)
                cur = out.terms.get(c)
                out.terms[c] = va * vb if cur is None else cur + va * vb
        return out

    __rmul__ = __mul__

    def scale_values(self, factor) -> "TaylorJet":
        return self * factor

    def power(self, e: int) -> "TaylorJet":
        out = TaylorJet.constant(self.dim, self.order, 1.0)
        for _ in range(e):
            out = out * self
        return out

    def _series(self, coeffs) -> "TaylorJet":
        """sum_i coeffs[i] * (self - self(0))^i, Horner form."""
        delta = self.copy()
        z = (0,) * self.dim
        delta.terms.pop(z, None)
        out = TaylorJet.constant(self.dim, self.order, coeffs[-1])
        for c in reversed(coeffs[:-1]):
            out = out * delta + c
        return out

    def reciprocal(self) -> "TaylorJet":
        v0 = self.value()
        inv = 1.0 / v0
        coeffs = [inv * (-inv) ** i for i in range(self.order + 1)]
        return self._series(coeffs)

    def exp(self) -> "TaylorJet":
        e0 = np.exp(self.value())
        coeffs = [e0 / math.factorial(i) for i in range(self.order + 1)]
        return self._series(coeffs)

    def evaluate(self, offset: np.ndarray):
        """Evaluate the truncated polynomial at base point + offset."""
        total = 0.0
        for l, v in self.terms.items():
            total = total + v * mi_power(offset, l)
        return total
