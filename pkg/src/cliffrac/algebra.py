"""Dense arithmetic in the real Clifford algebra Cl(n) with negative-definite
generators (e_i e_j + e_j e_i = -2 delta_ij) and the paravector embedding of
R^{n+1}.

Blades are encoded as bitmasks: bit (j-1) set means generator e_j is present,
mask 0 is the scalar blade. Coefficients are stored densely as float64 arrays
of length 2^n. Sign tables are memoized per n (capped at MAX_N) and read-only
after construction, so everything here is safe to call concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_N = 8


def _check_n(n: int) -> None:
    if not (1 <= n <= MAX_N):
        raise ValueError(f"algebra dimension n must be in 1..{MAX_N}, got {n}")


def blade_from_indices(indices) -> int:
    """Bitmask blade from a set/iterable of generator indices in {1..n}."""
    mask = 0
    for i in indices:
        if i < 1:
            raise ValueError(f"generator index out of range: {i}")
        mask |= 1 << (i - 1)
    return mask


def blade_indices(mask: int) -> tuple[int, ...]:
    """Sorted generator indices of a blade bitmask."""
    return tuple(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def blade_product(a: int, b: int, n: int | None = None) -> tuple[int, int]:
    """Product of basis blades: returns (sign, result_mask).

    Sign counts the transpositions needed to merge the ascending generator
    strings, plus one flip per squared generator (e_i^2 = -1).
    """
    if n is not None:
        limit = (1 << n) - 1
        if a & ~limit or b & ~limit or a < 0 or b < 0:
            raise ValueError(f"blade out of range for Cl({n})")
    swaps = 0
    rest = a
    bb = b
    while bb:
        i = (bb & -bb).bit_length() - 1  # lowest generator of b
        swaps += (rest >> (i + 1)).bit_count()
        bb &= bb - 1
    sign = -1 if (swaps + (a & b).bit_count()) % 2 else 1
    return sign, a ^ b


@lru_cache(maxsize=None)
def algebra(n: int) -> "CliffordAlgebra":
    _check_n(n)
    return CliffordAlgebra(n)


class CliffordAlgebra:
    """Memoized multiplication/conjugation tables for Cl(n)."""

    def __init__(self, n: int):
        _check_n(n)
        self.n = n
        self.dim = 1 << n
        dim = self.dim
        sign = np.empty((dim, dim))
        for a in range(dim):
            for b in range(dim):
                sign[a, b] = blade_product(a, b)[0]
        self.sign_table = sign
        self.sign_table.setflags(write=False)
        grades = np.array([a.bit_count() for a in range(dim)])
        self.conj_signs = np.where(grades * (grades + 1) // 2 % 2, -1.0, 1.0)
        self.conj_signs.setflags(write=False)
        # paravector slots: blade masks carrying e_0..e_n
        self.para_blades = np.array([0] + [1 << j for j in range(n)])

    def mul(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Geometric product on coefficient arrays; broadcasts over leading axes."""
        dim = self.dim
        out = np.zeros(np.broadcast_shapes(x.shape, y.shape), dtype=np.float64)
        s = self.sign_table
        for a in range(dim):
            xa = x[..., a]
            for b in range(dim):
                out[..., a ^ b] += s[a, b] * xa * y[..., b]
        return out

    def mul_para(self, p: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Left-multiply by a paravector given as (..., n+1) components."""
        out = np.zeros(np.broadcast_shapes(p.shape[:-1] + (self.dim,), y.shape))
        s = self.sign_table
        for j, a in enumerate(self.para_blades):
            pa = p[..., j]
            for b in range(self.dim):
                out[..., a ^ b] += s[a, b] * pa * y[..., b]
        return out

    def conj(self, x: np.ndarray) -> np.ndarray:
        return x * self.conj_signs

    def embed_para(self, points: np.ndarray) -> np.ndarray:
        """Paravector components (..., n+1) -> dense coefficients (..., 2^n)."""
        points = np.asarray(points, dtype=np.float64)
        out = np.zeros(points.shape[:-1] + (self.dim,))
        out[..., self.para_blades] = points
        return out

    def extract_para(self, x: np.ndarray) -> np.ndarray:
        return x[..., self.para_blades]


@dataclass(frozen=True)
class Multivector:
    """Dense element of Cl(n); immutable value type."""

    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        _check_n(self.n)
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (1 << self.n,):
            raise ValueError(f"Cl({self.n}) needs {1 << self.n} coefficients")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @staticmethod
    def zero(n: int) -> "Multivector":
        return Multivector(n, np.zeros(1 << n))

    @staticmethod
    def scalar(n: int, value: float) -> "Multivector":
        c = np.zeros(1 << n)
        c[0] = value
        return Multivector(n, c)

    @staticmethod
    def basis(n: int, indices) -> "Multivector":
        c = np.zeros(1 << n)
        c[blade_from_indices(indices)] = 1.0
        return Multivector(n, c)

    def _coerce(self, other) -> "Multivector":
        if isinstance(other, Multivector):
            if other.n != self.n:
                raise ValueError("dimension mismatch")
            return other
        return Multivector.scalar(self.n, float(other))

    def __add__(self, other):
        other = self._coerce(other)
        return Multivector(self.n, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return Multivector(self.n, self.coeffs - other.coeffs)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return Multivector(self.n, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Multivector(self.n, self.coeffs * other)
        other = self._coerce(other)
        return Multivector(self.n, algebra(self.n).mul(self.coeffs, other.coeffs))

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return Multivector(self.n, self.coeffs * other)
        return self._coerce(other) * self

    def conjugate(self) -> "Multivector":
        return Multivector(self.n, algebra(self.n).conj(self.coeffs))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __getitem__(self, indices) -> float:
        return float(self.coeffs[blade_from_indices(indices)])

    def isclose(self, other, tol: float = 1e-12) -> bool:
        other = self._coerce(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0, atol=tol))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_dict(self) -> dict:
        coeffs = {
            "".join(str(i) for i in blade_indices(mask)): float(c)
            for mask, c in enumerate(self.coeffs)
            if c != 0.0 or mask == 0
        }
        return {"n": self.n, "coeffs": coeffs}

    @staticmethod
    def from_dict(d: dict) -> "Multivector":
        n = int(d["n"])
        c = np.zeros(1 << n)
        for key, value in d["coeffs"].items():
            c[blade_from_indices(int(ch) for ch in key)] = float(value)
        return Multivector(n, c)

    @staticmethod
    def from_json(s: str) -> "Multivector":
        return Multivector.from_dict(json.loads(s))

    def __repr__(self):
        terms = []
        for mask, c in enumerate(self.coeffs):
            if c == 0.0:
                continue
            name = "e" + "".join(str(i) for i in blade_indices(mask)) if mask else "1"
            terms.append(f"{c:g}*{name}")
        return f"Multivector(Cl({self.n}): {' + '.join(terms) or '0'})"


def mv_mul(a: Multivector, b: Multivector) -> Multivector:
    return a * b


def conjugate(a: Multivector) -> Multivector:
    return a.conjugate()


def norm(a: Multivector) -> float:
    return a.norm()


@dataclass(frozen=True)
class Paravector:
    """Point of R^{n+1} identified with x^0 + sum x^j e_j in Cl(n)."""

    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=np.float64)
        if c.ndim != 1 or c.size < 2:
            raise ValueError("paravector needs at least 2 components")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @property
    def n(self) -> int:
        return self.components.size - 1

    def to_multivector(self) -> Multivector:
        return Multivector(self.n, algebra(self.n).embed_para(self.components))

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))


def paravector(*components) -> Paravector:
    if len(components) == 1 and np.ndim(components[0]) == 1:
        return Paravector(np.asarray(components[0], dtype=np.float64))
    return Paravector(np.array(components, dtype=np.float64))


def paravector_inverse(x: Paravector | np.ndarray) -> Multivector:
    """Inverse of a nonzero paravector: conj(x) / |x|^2."""
    comps = x.components if isinstance(x, Paravector) else np.asarray(x, float)
    nsq = float(np.dot(comps, comps))
    if nsq == 0.0:
        raise ZeroDivisionError("zero paravector has no inverse")
    n = comps.size - 1
    return Multivector(n, algebra(n).embed_para(comps)).conjugate() * (1.0 / nsq)
