"""Jump boundary value problems for polymonogenic fields.

Given a higher-order Lipschitz jet on a closed set S, assemble the field

    Phi = f~ . chi+  -  T^k (D^k f~)           (inner form)
    Phi = -f* . chi* +  T^k_{Omega*} (D^k f*)  (outer form, f* = f~ . rho)

whose one-sided Dirac iterates jump across S by the prescribed data, gate
construction on the Marcinkiewicz solvability condition nu > 1 - m/(n+1),
and verify the jumps numerically at paired probes straddling S.

Because every Teodorescu term away from its singular cell is exactly
monogenic in the probe, the Dirac iterates of Phi are evaluated through the
operator identity D(T^j u) = T^{j-1} u rather than by nested differencing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.spatial import cKDTree

from cliffrac.geometry import (
    LABEL_INSIDE,
    LABEL_OUTSIDE,
    Rect,
    SurfaceSpec,
    VoxelDomain,
    voxelize,
)
from cliffrac.kernels import dirac_fd
from cliffrac.metrics import theoretical_values
from cliffrac.transforms import DensityField, poly_teodorescu_at
from cliffrac.whitney import LipschitzJet, WhitneyExtension, assemble_bold_f

DECAY_SAMPLES = 24
GRADIENT_SIGMA_CELLS = 3.0


class SolvabilityError(ValueError):
    """The jump problem fails the solvability gate; carries the margin."""

    def __init__(self, message: str, margin: float):
        super().__init__(message)
        self.margin = margin


class IntegrabilityError(ValueError):
    """The density D^k f~ does not look integrable under refinement."""


# -- gates and closed-form bands -------------------------------------------


@dataclass(frozen=True)
class GateResult:
    ok: bool
    margin: float
    order_ok: bool

    def to_dict(self) -> dict:
        return {"ok": self.ok, "margin": self.margin, "order_ok": self.order_ok}


def solvability_check(nu: float, k: int, m_est: float, n: int) -> GateResult:
    """nu must exceed 1 - m/(n+1) and the order must satisfy k < n + 1."""
    if not 0.0 < m_est <= n + 1:
        raise ValueError(f"Marcinkiewicz estimate {m_est} outside (0, {n + 1}]")
    margin = nu - (1.0 - m_est / (n + 1))
    order_ok = k < n + 1
    return GateResult(margin > 0.0 and order_ok, margin, order_ok)


def uniqueness_band(nu: float, m_est: float, n: int, dim_upper: float):
    """(dim_upper - n, 1 - (n+1)(1-nu)/m_est), or None when degenerate.

    The analytic band is stated with the Hausdorff dimension; the box
    dimension bounds it from above, so this band is conservative.
    """
    if m_est <= 0:
        raise ValueError("Marcinkiewicz estimate must be positive")
    if not n <= dim_upper <= n + 1:
        raise ValueError(f"dimension estimate {dim_upper} outside [{n}, {n + 1}]")
    lo = dim_upper - n
    hi = 1.0 - (n + 1) * (1.0 - nu) / m_est
    if lo >= hi:
        return None
    return (lo, hi)


def condition_comparison(spec: SurfaceSpec) -> dict:
    """Marcinkiewicz vs dimension-substituted admissibility thresholds.

    Exponents in (marcinkiewicz_threshold, dimension_threshold] are admitted
    by the Marcinkiewicz gate but rejected if the dimension bound is used
    instead; alpha = 1 collapses the window.
    """
    theory = theoretical_values(spec)
    ambient = Fraction(spec.n + 1)
    m_threshold = 1 - theory.m_lower_exact / ambient
    dim_threshold = theory.dim_exact / ambient
    window = (m_threshold, dim_threshold) if m_threshold < dim_threshold else None
    return {
        "n": spec.n,
        "alpha": spec.alpha,
        "beta": spec.beta,
        "marcinkiewicz_threshold": m_threshold,
        "dimension_threshold": dim_threshold,
        "window": window,
    }


# -- smooth cutoff ---------------------------------------------------------


def _psi(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _rho_profile(s, r1: float, r: float) -> np.ndarray:
    """Smooth transition psi(r-s)/(psi(r-s)+psi(s-r1)); value 0.5 at midpoint."""
    s = np.asarray(s, dtype=np.float64)
    a = _psi(r - s)
    b = _psi(s - r1)
    total = a + b
    out = np.where(total > 0, a / np.where(total > 0, total, 1.0), 0.0)
    out = np.where(s <= r1, 1.0, out)
    out = np.where(s >= r, 0.0, out)
    return out


def cutoff_rho(r1: float, r: float, x) -> float:
    """C-infinity radial cutoff: 1 for |x| <= r1, 0 for |x| >= r."""
    if not 0.0 < r1 < r:
        raise ValueError("cutoff needs 0 < r1 < r")
    s = float(np.linalg.norm(np.asarray(x, dtype=np.float64)))
    return float(_rho_profile(s, r1, r))


# -- problem and solution types --------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    solid: object
    jet: LipschitzJet
    order: int
    nu: float
    side_choice: str = "auto"

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise ValueError("Hoelder exponent nu must lie in (0, 1]")
        if self.order < 1:
            raise ValueError("transform order k must be >= 1")
        if self.jet.order != self.order - 1:
            raise ValueError(
                f"jet order {self.jet.order} must equal k - 1 = {self.order - 1}"
            )
        if self.side_choice not in ("auto", "inner", "outer"):
            raise ValueError(f"unknown side {self.side_choice!r}")

    @property
    def n(self) -> int:
        return self.solid.n


@dataclass
class SolutionField:
    """Evaluates Phi and its Dirac iterates anywhere off S."""

    spec: ProblemSpec
    domain: VoxelDomain
    ext: WhitneyExtension
    density: DensityField
    side: str
    rho_params: tuple | None = None  # (center, r1, r) for the outer form
    bias: np.ndarray | None = None  # deliberate inner perturbation (tests)

    @property
    def k(self) -> int:
        return self.spec.order

    def _chi(self, pts: np.ndarray) -> np.ndarray:
        member = np.asarray(self.spec.solid.membership(pts), dtype=bool)
        if self.side == "inner":
            return member
        center, _, r = self.rho_params
        return (~member) & (np.linalg.norm(pts - center, axis=1) < r)

    def dirac_power(self, i: int, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if not 0 <= i <= self.k:
            raise ValueError(f"order {i} outside [0, {self.k}]")
        if i == self.k:
            # D^k Phi = (D^k f~ - u) chi = 0 exactly under the T-identities
            return np.zeros((pts.shape[0], 1 << self.spec.jet.n))
        chi = self._chi(pts)[:, None]
        transform = poly_teodorescu_at(self.density, self.k - i, pts, refine_near=True)
        if self.side == "inner":
            lead = self.ext.dirac_power(i, pts) if i else self.ext.evaluate(pts)
            out = lead * chi - transform
            if self.bias is not None and i == 0:
                out = out + self.bias[None, :] * chi
            return out
        return -_fstar_dirac(self.ext, self.rho_params, i, pts) * chi + transform

    def evaluate(self, points) -> np.ndarray:
        return self.dirac_power(0, points)

    def with_inner_bias(self, bias) -> "SolutionField":
        return SolutionField(
            self.spec,
            self.domain,
            self.ext,
            self.density,
            self.side,
            self.rho_params,
            np.asarray(bias, dtype=np.float64),
        )


# -- assembly --------------------------------------------------------------


def _fstar_dirac(ext: WhitneyExtension, rho_params, i: int, pts: np.ndarray) -> np.ndarray:
    """D^i (f~ rho): analytic inside the rho = 1 core, nested FD beyond."""
    center, r1, r = rho_params
    radii = np.linalg.norm(pts - center, axis=1)
    out = np.zeros((pts.shape[0], 1 << ext.jet.n))
    core = radii <= r1 - 1e-9
    if np.any(core):
        out[core] = ext.dirac_power(i, pts[core])
    rest = ~core
    if np.any(rest):

        def fstar(q, depth=i):
            if depth == 0:
                rho = _rho_profile(np.linalg.norm(q - center, axis=1), r1, r)
                return ext.evaluate(q) * rho[:, None]
            return dirac_fd(lambda z: fstar(z, depth - 1), q, h=1e-4)

        out[rest] = fstar(pts[rest])
    return out


def _default_m_estimate(solid) -> float:
    if isinstance(solid, SurfaceSpec):
        return theoretical_values(solid).m_lower
    return 1.0  # smooth calibration boundary


def _solid_center(solid) -> np.ndarray:
    if hasattr(solid, "center"):
        return np.asarray(solid.center, dtype=np.float64)
    box = solid.bounding_box()
    return 0.5 * (box.lo + box.hi)


def solve_jump(
    spec: ProblemSpec,
    depth: int,
    bounds: Rect | None = None,
    m_est: float | None = None,
    max_whitney_depth: int = 10,
    check_integrability: bool = False,
) -> SolutionField:
    solid = spec.solid
    n = spec.n
    k = spec.order
    if m_est is None:
        m_est = _default_m_estimate(solid)
    gate = solvability_check(spec.nu, k, m_est, n)
    if not gate.ok:
        raise SolvabilityError(
            f"solvability gate failed: nu = {spec.nu}, threshold "
            f"{1.0 - m_est / (n + 1):.4f}, k = {k} vs n + 1 = {n + 1}",
            gate.margin,
        )
    side = "inner" if spec.side_choice == "auto" else spec.side_choice
    bounds = bounds if bounds is not None else solid.default_bounds()
    dom = voxelize(solid, depth, bounds)
    ext = WhitneyExtension(spec.jet, bounds, max_depth=min(depth, max_whitney_depth))
    if side == "inner":
        cells = dom.side_indices(LABEL_INSIDE)
        fn = lambda pts: ext.dirac_power(k, pts)
        rho_params = None
    else:
        center = _solid_center(solid)
        r1 = 1.25 * solid.circumradius()
        r = 2.0 * r1
        if np.any(center + r > bounds.hi) or np.any(center - r < bounds.lo):
            raise ValueError(
                f"bounds must cover the cutoff ball of radius {r:.3g} for the outer form"
            )
        outer = dom.side_indices(LABEL_OUTSIDE)
        radii = np.linalg.norm(dom.centers(outer) - center, axis=1)
        cells = outer[radii < r]
        rho_params = (center, r1, r)
        fn = lambda pts: _fstar_dirac(ext, rho_params, k, pts)
    vals = fn(dom.centers(cells))
    density = DensityField(dom, cells, vals, fn, side)
    if check_integrability and depth >= 2:
        coarse_dom = voxelize(solid, depth - 1, bounds)
        coarse_cells = coarse_dom.side_indices(
            LABEL_INSIDE if side == "inner" else LABEL_OUTSIDE
        )
        coarse = DensityField(
            coarse_dom, coarse_cells, fn(coarse_dom.centers(coarse_cells)), fn, side
        )
        ratio = density.p_norm(1.0) / max(coarse.p_norm(1.0), 1e-300)
        if ratio > 2.0:
            raise IntegrabilityError(
                f"L1 mass of D^k f~ grew by {ratio:.2f}x under one refinement"
            )
    return SolutionField(spec, dom, ext, density, side, rho_params)


# -- verification ----------------------------------------------------------


@dataclass
class JumpReport:
    records: list
    summary: dict
    decay: list
    config: dict

    def to_dict(self) -> dict:
        return {
            "probes": self.records,
            "summary": {**self.summary, "decay": self.decay},
            "config": self.config,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


def _outward_directions(dom: VoxelDomain, pts: np.ndarray) -> np.ndarray:
    """Approach directions from the smoothed signed distance field."""
    signed = np.where(
        dom.labels == LABEL_OUTSIDE,
        dom.dist,
        np.where(dom.labels == LABEL_INSIDE, -dom.dist, 0.0),
    ).reshape(dom.shape)
    smooth = gaussian_filter(signed, sigma=GRADIENT_SIGMA_CELLS)
    grads = np.gradient(smooth, dom.cell_edge)
    idx = np.unravel_index(dom.cell_containing(pts), dom.shape)
    g = np.stack([grads[ax][idx] for ax in range(dom.dim)], axis=1)
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    center = 0.5 * (dom.bounds.lo + dom.bounds.hi)
    radial = pts - center
    radial /= np.maximum(np.linalg.norm(radial, axis=1, keepdims=True), 1e-12)
    flat = norms[:, 0] < 1e-12
    safe = np.where(norms > 1e-12, norms, 1.0)
    return np.where(flat[:, None], radial, g / safe)


def _paired_points(sol: SolutionField, spec: ProblemSpec, pts: np.ndarray, eps: float):
    """Oriented approach pairs and a mask of probes that straddle S."""
    dom = sol.domain
    dirs = _outward_directions(dom, pts)
    member = lambda q: np.asarray(spec.solid.membership(q), dtype=bool)
    flip = member(pts + eps * dirs) & ~member(pts - eps * dirs)
    dirs = dirs.copy()
    dirs[flip] *= -1.0
    x_out = pts + eps * dirs
    x_in = pts - eps * dirs
    ok = member(x_in) & ~member(x_out)
    ok &= dom.cell_containing(x_out) != dom.cell_containing(x_in)
    return x_in, x_out, ok


def filter_resolvable(sol: SolutionField, spec: ProblemSpec, probes, eps: float) -> np.ndarray:
    """Subset of probes whose paired points straddle the boundary at this depth."""
    pts = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    return pts[_paired_points(sol, spec, pts, eps)[2]]


def verify_jump(
    sol: SolutionField, spec: ProblemSpec, probes, eps: float, extrapolate: bool = False
) -> JumpReport:
    """Measure (D^i Phi)+ - (D^i Phi)- at paired probes against the jet data.

    With extrapolate=True the jump is measured at offsets eps and 2 eps and
    linearly extrapolated to the boundary, cancelling the leading Taylor gap
    of the one-sided samples.
    """
    dom = sol.domain
    pts = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    if eps < 2.0 * dom.cell_edge:
        raise ValueError("approach offset eps must be at least 2 cells")
    x_in, x_out, ok = _paired_points(sol, spec, pts, eps)
    if extrapolate:
        x_in2, x_out2, ok2 = _paired_points(sol, spec, pts, 2.0 * eps)
        ok = ok & ok2
    if not np.all(ok):
        raise ValueError(
            f"{int(np.count_nonzero(~ok))} probes not resolvable at this "
            "depth (paired points do not straddle the boundary)"
        )
    tree = cKDTree(spec.jet.points)
    carrier = tree.query(pts)[1]
    records = []
    errs = []
    scale = 0.0
    for i in range(sol.k):
        jump = sol.dirac_power(i, x_in) - sol.dirac_power(i, x_out)
        if extrapolate:
            jump2 = sol.dirac_power(i, x_in2) - sol.dirac_power(i, x_out2)
            jump = 2.0 * jump - jump2
        target = assemble_bold_f(spec.jet, i)[carrier]
        err = np.linalg.norm(jump - target, axis=1)
        scale = max(scale, float(np.max(np.linalg.norm(target, axis=1), initial=0.0)))
        errs.append(err)
        for p in range(pts.shape[0]):
            records.append(
                {
                    "y": pts[p].tolist(),
                    "i": i,
                    "jump": jump[p].tolist(),
                    "target": target[p].tolist(),
                    "abs_err": float(err[p]),
                }
            )
    errs = np.concatenate(errs)
    r0 = 4.0 * float(np.linalg.norm(dom.bounds.hi - dom.bounds.lo))
    decay = []
    dirs_far = _decay_directions(dom.dim)
    for i in range(sol.k):
        sups = []
        for r in (r0, 2.0 * r0):
            vals = sol.dirac_power(i, r * dirs_far)
            sups.append(float(np.max(np.linalg.norm(vals, axis=1))))
        ratio = sups[1] / sups[0] if sups[0] > 0 else 0.0
        decay.append({"i": i, "r": r0, "sup_r": sups[0], "sup_2r": sups[1], "ratio": ratio})
    return JumpReport(
        records,
        {
            "max_err": float(np.max(errs)),
            "median_err": float(np.median(errs)),
            "jet_scale": scale,
        },
        decay,
        {"depth": dom.k, "eps": eps, "side": sol.side, "extrapolate": extrapolate},
    )


def _decay_directions(d: int) -> np.ndarray:
    if d == 2:
        th = 2.0 * math.pi * (np.arange(DECAY_SAMPLES) + 0.5) / DECAY_SAMPLES
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    i = np.arange(DECAY_SAMPLES) + 0.5
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / DECAY_SAMPLES
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([z, rho * np.cos(phi), rho * np.sin(phi)], axis=1)


def boundary_samples(solid, count: int) -> np.ndarray:
    """Deterministic points on the boundary of a calibration or family shape."""
    if isinstance(solid, SurfaceSpec):
        return _surface_samples(solid, count)
    center = np.asarray(solid.center, dtype=np.float64)
    radius = float(solid.radius)
    if center.size in (2, 3):
        return center + radius * _boundary_sphere(center.size, count)
    raise NotImplementedError("boundary sampling covers 2 and 3 dimensions")


def _boundary_sphere(d: int, count: int) -> np.ndarray:
    if d == 2:
        th = 2.0 * math.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    i = np.arange(count) + 0.5
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / count
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([z, rho * np.cos(phi), rho * np.sin(phi)], axis=1)


def _surface_samples(spec: SurfaceSpec, count: int) -> np.ndarray:
    """Spread points over the faces, proportionally to face area."""
    faces = spec.faces()
    areas = np.array([float(np.prod(np.delete(f.hi - f.lo, f.axis))) for f in faces])
    quota = np.maximum(np.round(count * areas / areas.sum()).astype(int), 1)
    pts = []
    for f, q in zip(faces, quota):
        free = [ax for ax in range(f.lo.size) if ax != f.axis]
        per_axis = max(int(round(q ** (1.0 / len(free)))), 1)
        axes = [
            f.lo[ax] + (np.arange(per_axis) + 0.5) * (f.hi[ax] - f.lo[ax]) / per_axis
            for ax in free
        ]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(free))
        block = np.empty((grid.shape[0], f.lo.size))
        block[:, free] = grid
        block[:, f.axis] = f.level
        pts.append(block)
    return np.concatenate(pts, axis=0)
