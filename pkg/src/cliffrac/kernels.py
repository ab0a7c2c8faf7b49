"""Cauchy kernel, its polymonogenic iterates, and a finite-difference
surrogate for the generalized Cauchy-Riemann operator.

All evaluators are vectorized over point arrays of shape (..., n+1) and
return dense Cl(n) coefficient arrays of shape (..., 2^n). Pure functions,
safe for concurrent use.
"""

from __future__ import annotations

import math

import numpy as np

from cliffrac.algebra import Multivector, Paravector, algebra

DEFAULT_FD_STEP = 1e-4


def unit_sphere_area(m: int) -> float:
    """Hypersurface area of the unit sphere in R^m: 2 pi^{m/2} / Gamma(m/2)."""
    if m < 2:
        raise ValueError(f"ambient dimension must be >= 2, got {m}")
    return 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)


def _as_points(x, n: int | None) -> tuple[np.ndarray, int]:
    if isinstance(x, Paravector):
        pts = x.components
    else:
        pts = np.asarray(x, dtype=np.float64)
    if n is None:
        n = pts.shape[-1] - 1
    elif pts.shape[-1] != n + 1:
        raise ValueError(f"points of R^{n + 1} expected, got shape {pts.shape}")
    return pts, n


def cauchy_kernel_at(points, n: int | None = None) -> np.ndarray:
    """E(x) = conj(x) / (sigma_{n+1} |x|^{n+1}), vectorized; raises at x = 0."""
    return poly_kernel_at(1, points, n)


def poly_kernel_at(k: int, points, n: int | None = None) -> np.ndarray:
    """E^k(x) = E(x) * x0^{k-1} / (k-1)!, normalized so that D E^k = E^{k-1}."""
    if k < 1:
        raise ValueError("kernel order k must be >= 1")
    pts, n = _as_points(points, n)
    alg = algebra(n)
    r2 = np.sum(pts * pts, axis=-1)
    if np.any(r2 == 0.0):
        raise ZeroDivisionError("kernel evaluated at the singularity x = 0")
    scale = r2 ** (-(n + 1) / 2) / unit_sphere_area(n + 1)
    if k > 1:
        scale = scale * pts[..., 0] ** (k - 1) / math.factorial(k - 1)
    conj = pts.copy()
    conj[..., 1:] *= -1.0
    return alg.embed_para(conj * scale[..., None])


def cauchy_kernel(x, n: int | None = None) -> Multivector:
    pts, n = _as_points(x, n)
    return Multivector(n, cauchy_kernel_at(pts, n))


def poly_kernel(k: int, x, n: int | None = None) -> Multivector:
    pts, n = _as_points(x, n)
    return Multivector(n, poly_kernel_at(k, pts, n))


def dirac_fd(f, points, h: float = DEFAULT_FD_STEP, n: int | None = None) -> np.ndarray:
    """Central-difference Dirac operator sum_j e_j (f(x+h e_j) - f(x-h e_j)) / 2h.

    `f` maps point arrays (..., n+1) to coefficient arrays (..., 2^n).
    Second-order accurate in h.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    pts, n = _as_points(points, n)
    alg = algebra(n)
    d = n + 1
    stencil = np.empty(pts.shape[:-1] + (2 * d, d))
    for j in range(d):
        stencil[..., 2 * j, :] = pts
        stencil[..., 2 * j, j] += h
        stencil[..., 2 * j + 1, :] = pts
        stencil[..., 2 * j + 1, j] -= h
    vals = f(stencil.reshape(-1, d)).reshape(pts.shape[:-1] + (2 * d, alg.dim))
    out = np.zeros(pts.shape[:-1] + (alg.dim,))
    basis = np.eye(d)
    for j in range(d):
        diff = (vals[..., 2 * j, :] - vals[..., 2 * j + 1, :]) / (2.0 * h)
        out += alg.mul_para(basis[j], diff)
    return out


def dirac_fd_pow(f, points, order: int, h: float = DEFAULT_FD_STEP, n: int | None = None) -> np.ndarray:
    """Nested application of dirac_fd; the stencil widens with each level."""
    if order < 0:
        raise ValueError("order must be non-negative")
    pts, n = _as_points(points, n)
    if order == 0:
        return f(pts)
    inner = f if order == 1 else (lambda q: dirac_fd_pow(f, q, order - 1, h, n))
    return dirac_fd(inner, pts, h, n)
