"""Higher-order Lipschitz jets and a constructive Whitney extension.

A jet carries the data {f^(j), |j| <= order} of Cl(n)-valued functions on a
finite carrier E. The extension glues the anchors' Taylor polynomials with
a smooth partition of unity over a Whitney cube decomposition of the
complement, so it reproduces polynomial jets exactly and is C^inf off E.
Dirac powers D^i of the extension are evaluated analytically through
truncated Taylor arithmetic (no finite differences), as

    D^i g = sum over sequences (r_1..r_i) in {0..n}^i of
            e_{r_1} ... e_{r_i} partial^{gamma} g,   gamma = sum of units.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from cliffrac.algebra import Multivector, algebra, blade_product
from cliffrac.jets import TaylorJet, mi_factorial, mi_power, multi_indices

# support expansion of each cube; wide enough overlap that no point is
# covered only by bump tails (keeps normalized-weight derivatives tame)
CUBE_EXPANSION = 1.5
# keep bump arguments strictly inside |s| < 1 so 1/(1 - s^2) stays finite
_SUPPORT_MARGIN = 1e-9


@dataclass(frozen=True)
class WhitneyCube:
    lo: np.ndarray
    edge: float
    anchor: int
    collar: bool = False

    @property
    def center(self) -> np.ndarray:
        return self.lo + self.edge / 2.0

    @property
    def diam(self) -> float:
        return self.edge * math.sqrt(self.lo.size)

    @property
    def support_half(self) -> float:
        return self.edge / 2.0 * CUBE_EXPANSION


def _component_key(l) -> str:
    return " ".join(str(e) for e in l)


@dataclass
class LipschitzJet:
    """Samples {f^(j)} of a Lip(E, (order+1) + nu - 1) jet on a point carrier."""

    n: int
    order: int
    nu: float
    points: np.ndarray
    components: dict
    bound: float | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        d = self.n + 1
        if self.points.shape[1] != d:
            raise ValueError(f"carrier points must lie in R^{d}")
        if not (0.0 < self.nu <= 1.0):
            raise ValueError("smoothness nu must be in (0, 1]")
        if self.order < 0:
            raise ValueError("order must be non-negative")
        m, width = self.points.shape[0], 1 << self.n
        comps = {}
        for l in multi_indices(d, self.order):
            if l not in self.components:
                raise ValueError(f"missing jet component {l}")
            arr = np.asarray(self.components[l], dtype=np.float64)
            if arr.shape != (m, width):
                raise ValueError(f"component {l} must have shape {(m, width)}")
            comps[l] = arr
        self.components = comps

    @property
    def k(self) -> int:
        return self.order + 1

    @property
    def dim(self) -> int:
        return self.n + 1

    @staticmethod
    def from_function(n, order, nu, points, component_fn) -> "LipschitzJet":
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        comps = {
            l: np.asarray(component_fn(l, pts), dtype=np.float64)
            for l in multi_indices(n + 1, order)
        }
        return LipschitzJet(n, order, nu, pts, comps)

    @staticmethod
    def from_polynomial(n, order, nu, points, poly: dict) -> "LipschitzJet":
        """Jet of q(x) = sum_l coeff_l x^l with Cl(n)-array coefficients."""
        poly = {tuple(l): np.asarray(c, dtype=np.float64) for l, c in poly.items()}

        def component(j, pts):
            out = np.zeros((pts.shape[0], 1 << n))
            for l, c in poly.items():
                if any(le < je for le, je in zip(l, j)):
                    continue
                shifted = tuple(le - je for le, je in zip(l, j))
                factor = mi_factorial(l) / mi_factorial(shifted)
                out += factor * mi_power(pts, shifted)[:, None] * c[None, :]
            return out

        return LipschitzJet.from_function(n, order, nu, points, component)

    def to_dict(self) -> dict:
        pts = []
        for i, x in enumerate(self.points):
            comps = {
                _component_key(l): Multivector(self.n, arr[i]).to_dict()
                for l, arr in sorted(self.components.items())
            }
            pts.append({"x": [float(v) for v in x], "components": comps})
        return {"n": self.n, "k": self.k, "nu": self.nu, "points": pts}

    @staticmethod
    def from_dict(d: dict) -> "LipschitzJet":
        n, order, nu = int(d["n"]), int(d["k"]) - 1, float(d["nu"])
        pts = np.array([p["x"] for p in d["points"]], dtype=np.float64)
        comps = {}
        for l in multi_indices(n + 1, order):
            key = _component_key(l)
            comps[l] = np.stack(
                [Multivector.from_dict(p["components"][key]).coeffs for p in d["points"]]
            )
        return LipschitzJet(n, order, nu, pts, comps)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path) -> "LipschitzJet":
        with open(path) as fh:
            return LipschitzJet.from_dict(json.load(fh))


def _unit_mi(dim: int, r: int):
    """1_r of the bold-f assembly: the zero multi-index for r = 0, else e_r slot."""
    out = [0] * dim
    if r > 0:
        out[r] = 1
    return tuple(out)


def _sequence_terms(n: int, i: int):
    """(sign, blade_mask, gamma) for every sequence (r_1..r_i) in {0..n}^i.

    The Dirac operator D = partial_0 + sum_j e_j partial_j expands D^i into
    these terms; gamma is the resulting partial-derivative multi-index.
    The index r = 0 addresses the scalar direction x0, which is gamma's
    first entry here.
    """
    dim = n + 1
    for seq in itertools.product(range(n + 1), repeat=i):
        sign, mask = 1, 0
        gamma = [0] * dim
        for r in seq:
            if r > 0:
                s, mask = blade_product(mask, 1 << (r - 1), n=n)
                sign *= s
            gamma[r] += 1
        yield sign, mask, tuple(gamma)


def assemble_bold_f(jet: LipschitzJet, i: int) -> np.ndarray:
    """bold-f^(i) = sum e_{r_1}..e_{r_i} f^{(1_{r_1}+..+1_{r_i})} on the carrier."""
    if not (0 <= i <= jet.order):
        raise ValueError(f"i must be in 0..{jet.order}")
    alg = algebra(jet.n)
    out = np.zeros((jet.points.shape[0], alg.dim))
    for sign, mask, gamma in _sequence_terms(jet.n, i):
        blade = np.zeros(alg.dim)
        blade[mask] = sign
        out += alg.mul(blade, jet.components[gamma])
    return out


def whitney_decompose(points, bounds, max_depth: int = 10) -> list:
    """Dyadic Whitney cubes of bounds minus the carrier point cloud.

    A cube is accepted once dist(cube, E) >= diam(cube); rejected cubes
    split until max_depth, where positive-distance leftovers are flagged as
    collar cubes and cubes touching E are dropped.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.size == 0:
        raise ValueError("carrier must be non-empty")
    d = pts.shape[1]
    tree = cKDTree(pts)
    root_edge = float(np.max(bounds.edges))
    out = []
    stack = [(np.asarray(bounds.lo, dtype=np.float64), root_edge, 0)]
    while stack:
        lo, edge, depth = stack.pop()
        center = lo + edge / 2.0
        hd = edge * math.sqrt(d) / 2.0
        d_center, nearest = tree.query(center)
        cand = tree.query_ball_point(center, d_center + hd + 1e-12)
        gap = np.maximum(np.maximum(lo - pts[cand], pts[cand] - (lo + edge)), 0.0)
        exact = float(np.min(np.sqrt(np.sum(gap * gap, axis=1))))
        if exact >= 2.0 * hd:  # dist(cube, E) >= diam(cube)
            out.append(WhitneyCube(lo, edge, int(nearest), False))
        elif depth >= max_depth:
            if exact > 0.0:
                out.append(WhitneyCube(lo, edge, int(nearest), True))
        else:
            half = edge / 2.0
            for corner in itertools.product((0, 1), repeat=d):
                stack.append((lo + half * np.asarray(corner, dtype=np.float64), half, depth + 1))
    return out


class WhitneyExtension:
    """Evaluatable extension of a jet, with analytic Dirac powers."""

    def __init__(self, jet: LipschitzJet, bounds, max_depth: int = 10):
        self.jet = jet
        self.bounds = bounds
        self.alg = algebra(jet.n)
        self.cubes = whitney_decompose(jet.points, bounds, max_depth)
        self.tree = cKDTree(jet.points)
        self.root_lo = np.asarray(bounds.lo, dtype=np.float64)
        self.root_edge = float(np.max(bounds.edges))
        self._centers = np.stack([c.center for c in self.cubes]) if self.cubes else np.zeros((0, jet.dim))
        self._support = np.array([c.support_half for c in self.cubes])
        # per-depth lookup: sorted encoded cell indices -> cube ids
        self._levels = {}
        per_level = {}
        for ci, cube in enumerate(self.cubes):
            level = round(math.log2(self.root_edge / cube.edge))
            idx = np.round((cube.lo - self.root_lo) / cube.edge).astype(np.int64)
            per_level.setdefault(level, []).append((idx, ci))
        for level, items in per_level.items():
            stride = (1 << level) + 3
            keys = np.array([self._encode(idx, stride) for idx, _ in items], dtype=np.int64)
            ids = np.array([ci for _, ci in items], dtype=np.int64)
            order = np.argsort(keys)
            self._levels[level] = (keys[order], ids[order], stride)

    @staticmethod
    def _encode(idx, stride):
        out = np.zeros(idx.shape[:-1], dtype=np.int64)
        for ax in range(idx.shape[-1]):
            out = out * stride + idx[..., ax] + 1
        return out

    # -- point/cube incidence ---------------------------------------------

    def covering_pairs(self, points: np.ndarray):
        """(point_indices, cube_indices) where the expanded cube covers x."""
        pts = np.atleast_2d(points)
        d = pts.shape[1]
        offsets = list(itertools.product((-1, 0, 1), repeat=d))
        pis, cis = [], []
        for level, (keys, ids, stride) in self._levels.items():
            edge = self.root_edge / (1 << level)
            base = np.floor((pts - self.root_lo) / edge).astype(np.int64)
            for off in offsets:
                shifted = base + np.asarray(off, dtype=np.int64)
                valid = np.all((shifted >= -1) & (shifted < stride - 1), axis=1)
                enc = self._encode(shifted, stride)
                pos = np.searchsorted(keys, enc)
                pos_ok = valid & (pos < keys.size)
                pos_c = np.where(pos_ok, pos, 0)
                hit = pos_ok & (keys[pos_c] == enc)
                pi = np.nonzero(hit)[0]
                if pi.size == 0:
                    continue
                ci = ids[pos_c[pi]]
                rel = np.abs(pts[pi] - self._centers[ci])
                inside = np.all(
                    rel < self._support[ci][:, None] * (1.0 - _SUPPORT_MARGIN), axis=1
                )
                pis.append(pi[inside])
                cis.append(ci[inside])
        if not pis:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return np.concatenate(pis), np.concatenate(cis)

    # -- jets of the ingredients ------------------------------------------

    def _weight_jet(self, x0: np.ndarray, cube: WhitneyCube, order: int) -> TaylorJet:
        """Tensor-product bump exp(1 - 1/(1 - s^2)) per axis, jet at x0."""
        d = self.jet.dim
        half = cube.support_half
        w = TaylorJet.constant(d, order, np.ones((x0.shape[0], 1)))
        for ax in range(d):
            s0 = ((x0[:, ax] - cube.center[ax]) / half)[:, None]
            s = TaylorJet.linear(d, order, s0, ax, 1.0 / half)
            w = w * (1.0 - (1.0 - s * s).reciprocal()).exp()
        return w

    def _taylor_jet(self, x0: np.ndarray, anchor: int, order: int) -> TaylorJet:
        """Jet (at x0) of the anchor's Taylor polynomial P(x, p_anchor)."""
        d = self.jet.dim
        y = self.jet.points[anchor]
        out = TaylorJet(d, order, {})
        axis_jets = [TaylorJet.linear(d, order, (x0[:, ax] - y[ax])[:, None], ax) for ax in range(d)]
        for l, comp in self.jet.components.items():
            real = TaylorJet.constant(d, order, np.ones((x0.shape[0], 1)) / mi_factorial(l))
            for ax, e in enumerate(l):
                for _ in range(e):
                    real = real * axis_jets[ax]
            coeff = comp[anchor][None, :]
            for mi, v in real.terms.items():
                cur = out.terms.get(mi)
                contrib = v * coeff
                out.terms[mi] = contrib if cur is None else cur + contrib
        return out

    def field_jet(self, points: np.ndarray, order: int) -> TaylorJet:
        """Taylor jet of the extension at every point (batched array values)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        m, width = pts.shape[0], self.alg.dim
        d = self.jet.dim
        pi_all, ci_all = self.covering_pairs(pts)
        num = {}
        den = {}

        def _acc(store, mi, idx, val, width_):
            arr = store.get(mi)
            if arr is None:
                arr = np.zeros((m, width_))
                store[mi] = arr
            arr[idx] += val

        order_idx = np.argsort(ci_all, kind="stable")
        ci_sorted, pi_sorted = ci_all[order_idx], pi_all[order_idx]
        uniq, starts = np.unique(ci_sorted, return_index=True)
        for ci, start, stop in zip(
            uniq, starts, list(starts[1:]) + [ci_sorted.size]
        ):
            idx = pi_sorted[start:stop]
            sub = pts[idx]
            cube = self.cubes[int(ci)]
            w = self._weight_jet(sub, cube, order)
            p = self._taylor_jet(sub, cube.anchor, order)
            contrib = w * p
            for mi, v in contrib.terms.items():
                _acc(num, mi, idx, v, width)
            for mi, v in w.terms.items():
                _acc(den, mi, idx, v[:, 0:1], 1)

        zero = (0,) * d
        den_val = den.get(zero, np.zeros((m, 1)))
        # points clinging to the edge of every covering bump (weight ~ 1e-300)
        # would blow up the reciprocal; send them to the Taylor fallback. Any
        # point interior to its own Whitney cube has weight >= psi(8/9) ~ 0.02.
        covered = den_val[:, 0] > 1e-6
        # guard the reciprocal at uncovered points; overwritten below
        if zero in den:
            den[zero] = np.where(covered[:, None], den_val, 1.0)
        else:
            den[zero] = np.ones((m, 1))
        total = TaylorJet(d, order, num) * TaylorJet(d, order, den).reciprocal()
        for mi in multi_indices(d, order):
            if mi not in total.terms:
                total.terms[mi] = np.zeros((m, width))
        # uncovered points (inside the collar gap or on E): nearest-anchor
        # Taylor polynomial alone
        holes = np.nonzero(~covered)[0]
        if holes.size:
            _, anchors = self.tree.query(pts[holes])
            anchors = np.atleast_1d(anchors)
            for a in np.unique(anchors):
                sel = holes[anchors == a]
                pj = self._taylor_jet(pts[sel], int(a), order)
                for mi in multi_indices(d, order):
                    v = pj.terms.get(mi)
                    total.terms[mi][sel] = 0.0 if v is None else v
        return total

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.field_jet(points, 0).value()

    def dirac_power(self, i: int, points: np.ndarray) -> np.ndarray:
        """D^i of the extension at each point, by analytic jet differentiation."""
        if i < 0 or i > self.jet.k:
            raise ValueError(f"i must be in 0..{self.jet.k}")
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        fj = self.field_jet(pts, i)
        out = np.zeros((pts.shape[0], self.alg.dim))
        for sign, mask, gamma in _sequence_terms(self.jet.n, i):
            blade = np.zeros(self.alg.dim)
            blade[mask] = sign
            out += self.alg.mul(blade, fj.derivative(gamma))
        return out

    def partition_values(self, x: np.ndarray):
        """Normalized partition weights {phi_i(x)} over covering cubes."""
        x = np.asarray(x, dtype=np.float64)
        _, cis = self.covering_pairs(x[None, :])
        weights = []
        for ci in cis:
            w = self._weight_jet(x[None, :], self.cubes[int(ci)], 0).value()[0, 0]
            weights.append((int(ci), w))
        total = sum(w for _, w in weights)
        if total <= 0:
            return []
        return [(ci, w / total) for ci, w in weights]


def extend(jet: LipschitzJet, points, bounds, max_depth: int = 10) -> np.ndarray:
    return WhitneyExtension(jet, bounds, max_depth).evaluate(points)


def dirac_power_extension(jet: LipschitzJet, i: int, points, bounds, max_depth: int = 10) -> np.ndarray:
    return WhitneyExtension(jet, bounds, max_depth).dirac_power(i, points)


def estimate_lip_constant(jet: LipschitzJet, max_pairs: int = 20000, seed: int = 0) -> float:
    """Smallest empirical M: sup |f^(j)| and sup |R_j| / |x-y|^{k-1+nu-|j|}."""
    m = jet.points.shape[0]
    if m < 2:
        raise ValueError("need at least 2 carrier samples")
    rng = np.random.default_rng(seed)
    total = m * (m - 1)
    if total <= max_pairs:
        xi, yi = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        keep = xi != yi
        xi, yi = xi[keep], yi[keep]
    else:
        xi = rng.integers(0, m, size=max_pairs)
        yi = (xi + rng.integers(1, m, size=max_pairs)) % m
    diff = jet.points[xi] - jet.points[yi]
    sep = np.linalg.norm(diff, axis=1)
    best = max(float(np.max(np.linalg.norm(arr, axis=1))) for arr in jet.components.values())
    for j, fj in jet.components.items():
        taylor = np.zeros_like(fj[xi])
        for l in multi_indices(jet.dim, jet.order - sum(j)):
            jl = tuple(a + b for a, b in zip(j, l))
            taylor += jet.components[jl][yi] * (mi_power(diff, l) / mi_factorial(l))[:, None]
        resid = np.linalg.norm(fj[xi] - taylor, axis=1)
        expo = jet.order + jet.nu - sum(j)
        best = max(best, float(np.max(resid / sep**expo)))
    return best
