"""Command-line front end: generate surfaces, estimate scaling exponents,
solve and verify jump problems, and render report figures.

Exit codes: 0 success, 2 invalid parameters, 3 I/O failure, 4 fit quality
above --max-stderr, 5 solvability gate rejection, 6 verification failure.
All outputs are deterministic for a fixed configuration.
"""

from __future__ import annotations

import json
import os
import pathlib
import sys

import click
import numpy as np

from cliffrac.geometry import (
    BallSolid,
    Rect,
    SurfaceSpec,
    VoxelDomain,
    build_surface_spec,
    truncation_level,
    voxelize,
)
from cliffrac.metrics import (
    box_count_curve,
    inequality_report,
    marcinkiewicz_exponent,
    minkowski_dimension,
    save_estimates,
    theoretical_values,
    volume_curve,
)
from cliffrac.rbvp import (
    IntegrabilityError,
    ProblemSpec,
    SolvabilityError,
    boundary_samples,
    filter_resolvable,
    solve_jump,
    verify_jump,
)
from cliffrac.whitney import LipschitzJet

EXIT_INVALID = 2
EXIT_IO = 3
EXIT_FIT = 4
EXIT_GATE = 5
EXIT_VERIFY = 6


def _fail(code: int, message: str, as_json: bool):
    if as_json:
        click.echo(json.dumps({"error": message, "exit_code": code}, sort_keys=True))
    else:
        click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _emit(payload: dict, as_json: bool):
    if as_json:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        for key, val in payload.items():
            click.echo(f"{key}: {val}")


def _apply_config(ctx: click.Context, kwargs: dict) -> dict:
    """Merge --config JSON under explicitly passed flags (flags win)."""
    path = kwargs.pop("config", None)
    if not path:
        return kwargs
    try:
        overrides = json.loads(pathlib.Path(path).read_text())
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read config: {exc}", kwargs.get("as_json", False))
    except json.JSONDecodeError as exc:
        _fail(EXIT_INVALID, f"malformed config: {exc}", kwargs.get("as_json", False))
    for key, val in overrides.items():
        name = key.replace("-", "_")
        if name in kwargs and ctx.get_parameter_source(name) == click.core.ParameterSource.DEFAULT:
            kwargs[name] = val
    return kwargs


def _limit_threads(count):
    if not count:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(int(count))
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(count)


def _load_solid(spec_path, shape, radius, as_json):
    if spec_path:
        try:
            return SurfaceSpec.load(spec_path)
        except OSError as exc:
            _fail(EXIT_IO, f"cannot read surface spec: {exc}", as_json)
        except (ValueError, KeyError) as exc:
            _fail(EXIT_INVALID, f"bad surface spec: {exc}", as_json)
    if shape == "disk":
        return BallSolid(np.zeros(2), radius)
    if shape == "ball":
        return BallSolid(np.zeros(3), radius)
    _fail(EXIT_INVALID, "provide --spec FILE or --shape {disk,ball}", as_json)


def _default_bounds(solid) -> Rect:
    if isinstance(solid, SurfaceSpec):
        return solid.default_bounds()
    half = 2.0 * solid.radius
    return Rect(solid.center - half, solid.center + half)


@click.group()
def main():
    """Fractal hypersurfaces, Marcinkiewicz exponents, and jump problems."""


@main.command("gen-surface")
@click.option("--n", type=int, default=1, show_default=True)
@click.option("--alpha", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--m-max", type=int, default=None, help="stack truncation level")
@click.option("--depth", type=int, default=None, help="voxel grid depth k")
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def gen_surface(ctx, **kwargs):
    """Write a family-surface spec JSON and its voxelization."""
    kw = _apply_config(ctx, kwargs)
    as_json = kw["as_json"]
    if kw["alpha"] is None or kw["beta"] is None or kw["depth"] is None:
        _fail(EXIT_INVALID, "--alpha, --beta, and --depth are required", as_json)
    m_max = kw["m_max"] if kw["m_max"] is not None else truncation_level(kw["beta"], kw["depth"])
    try:
        spec = build_surface_spec(kw["n"], kw["alpha"], kw["beta"], m_max)
        dom = voxelize(spec, kw["depth"], spec.default_bounds())
    except (ValueError, MemoryError) as exc:
        _fail(EXIT_INVALID, str(exc), as_json)
    out = pathlib.Path(kw["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        spec.save(out / "surface_spec.json")
        dom.save(out / "surface.vox")
    except OSError as exc:
        _fail(EXIT_IO, str(exc), as_json)
    labels = dom.labels
    _emit(
        {
            "spec": str(out / "surface_spec.json"),
            "voxels": str(out / "surface.vox"),
            "depth": kw["depth"],
            "m_max": m_max,
            "boundary_cells": int(np.count_nonzero(labels == 0)),
            "inside_cells": int(np.count_nonzero(labels == 1)),
            "outside_cells": int(np.count_nonzero(labels == 2)),
        },
        as_json,
    )


def _parse_depths(text: str):
    lo, _, hi = text.partition(":")
    return range(int(lo), int(hi) + 1)


@main.command("estimate")
@click.option("--spec", "spec_path", type=click.Path(), default=None)
@click.option("--shape", type=click.Choice(["disk", "ball"]), default=None)
@click.option("--radius", type=float, default=1.0, show_default=True)
@click.option("--depths", default="6:12", show_default=True, help="box-count range lo:hi")
@click.option("--depth", type=int, default=8, show_default=True, help="volume-curve depth")
@click.option("--max-stderr", type=float, default=float("inf"), show_default=True)
@click.option("--theory", is_flag=True, help="add closed forms for family surfaces")
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def estimate(ctx, **kwargs):
    """Box-counting dimension and Marcinkiewicz exponents with CSV curves."""
    kw = _apply_config(ctx, kwargs)
    as_json = kw["as_json"]
    solid = _load_solid(kw["spec_path"], kw["shape"], kw["radius"], as_json)
    n = solid.n
    try:
        curve = box_count_curve(solid, _parse_depths(kw["depths"]))
        dim = minkowski_dimension(curve)
        dom = voxelize(solid, kw["depth"], _default_bounds(solid))
        inner_curve = volume_curve(dom, "inner")
        outer_curve = volume_curve(dom, "outer")
        m_inner = marcinkiewicz_exponent(dom, "inner")
        m_outer = marcinkiewicz_exponent(dom, "outer")
        m_abs = marcinkiewicz_exponent(dom, "absolute")
    except (ValueError, MemoryError) as exc:
        _fail(EXIT_INVALID, str(exc), as_json)
    if dim.slope_stderr > kw["max_stderr"]:
        _fail(
            EXIT_FIT,
            f"dimension fit stderr {dim.slope_stderr:.4f} exceeds {kw['max_stderr']}",
            as_json,
        )
    ineq = inequality_report(dim, m_abs, n)
    extras = {}
    if kw["theory"] and isinstance(solid, SurfaceSpec):
        extras["theory"] = theoretical_values(solid).to_dict()
    out = pathlib.Path(kw["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        curve.to_csv(out / "boxcount.csv")
        inner_curve.to_csv(out / "volume_inner.csv")
        outer_curve.to_csv(out / "volume_outer.csv")
        save_estimates(
            out / "estimates.json",
            dimension=dim,
            m_inner=m_inner,
            m_outer=m_outer,
            m_absolute=m_abs,
            inequality=ineq,
            **extras,
        )
    except OSError as exc:
        _fail(EXIT_IO, str(exc), as_json)
    _emit(
        {
            "estimates": str(out / "estimates.json"),
            "dim": dim.value,
            "dim_stderr": dim.slope_stderr,
            "m_inner": m_inner.value,
            "m_outer": m_outer.value,
            "m_absolute": m_abs.value,
            **({"theory_dim": extras["theory"]["dim"]} if extras else {}),
        },
        as_json,
    )


@main.command("solve")
@click.option("--spec", "spec_path", type=click.Path(), default=None)
@click.option("--shape", type=click.Choice(["disk", "ball"]), default=None)
@click.option("--radius", type=float, default=1.0, show_default=True)
@click.option("--jet", "jet_path", type=click.Path(), default=None)
@click.option("--k", type=int, default=None, help="Dirac order (default: jet order + 1)")
@click.option("--nu", type=float, default=None, help="smoothness (default: jet nu)")
@click.option("--side", type=click.Choice(["auto", "inner", "outer"]), default="auto")
@click.option("--depth", type=int, default=None)
@click.option("--probes", type=int, default=50, show_default=True)
@click.option("--eps", type=float, default=4.0, show_default=True, help="offset in cells")
@click.option("--tolerance", type=float, default=0.1, show_default=True)
@click.option("--extrapolate", is_flag=True)
@click.option("--seed", type=int, default=0, show_default=True, help="probe subsampling seed")
@click.option("--threads", type=int, default=None, help="cap BLAS thread pools")
@click.option("--out", type=click.Path(), default=".", show_default=True)
@click.option("--json", "as_json", is_flag=True)
@click.option("--config", type=click.Path(), default=None)
@click.pass_context
def solve(ctx, **kwargs):
    """Solve the jump problem, verify it, and write the report."""
    kw = _apply_config(ctx, kwargs)
    as_json = kw["as_json"]
    _limit_threads(kw["threads"])
    if kw["jet_path"] is None or kw["depth"] is None:
        _fail(EXIT_INVALID, "--jet and --depth are required", as_json)
    solid = _load_solid(kw["spec_path"], kw["shape"], kw["radius"], as_json)
    try:
        jet = LipschitzJet.load(kw["jet_path"])
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read jet: {exc}", as_json)
    except (ValueError, KeyError) as exc:
        _fail(EXIT_INVALID, f"bad jet file: {exc}", as_json)
    k = kw["k"] if kw["k"] is not None else jet.k
    nu = kw["nu"] if kw["nu"] is not None else jet.nu
    try:
        spec = ProblemSpec(solid, jet, k, nu, kw["side"])
        sol = solve_jump(spec, kw["depth"], _default_bounds(solid))
    except SolvabilityError as exc:
        _fail(EXIT_GATE, f"{exc} (margin {exc.margin:+.4f})", as_json)
    except (IntegrabilityError, ValueError, MemoryError) as exc:
        _fail(EXIT_INVALID, str(exc), as_json)
    eps = kw["eps"] * sol.domain.cell_edge
    # draw from a 4x oversampled candidate set so unresolvable points can be replaced
    candidates = boundary_samples(solid, 4 * kw["probes"])
    probes = filter_resolvable(sol, spec, candidates, eps)
    if len(probes) == 0:
        _fail(EXIT_INVALID, "no resolvable probes at this depth", as_json)
    if len(probes) > kw["probes"]:
        rng = np.random.default_rng(kw["seed"])
        probes = probes[rng.choice(len(probes), size=kw["probes"], replace=False)]
    try:
        rep = verify_jump(sol, spec, probes, eps, extrapolate=kw["extrapolate"])
    except ValueError as exc:
        _fail(EXIT_INVALID, str(exc), as_json)
    out = pathlib.Path(kw["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        rep.save(out / "jump_report.json")
        with open(out / "probes.csv", "w") as fh:
            fh.write("i,abs_err," + ",".join(f"y{a}" for a in range(probes.shape[1])) + "\n")
            for r in rep.records:
                coords = ",".join(f"{v:.12g}" for v in r["y"])
                fh.write(f"{r['i']},{r['abs_err']:.12g},{coords}\n")
    except OSError as exc:
        _fail(EXIT_IO, str(exc), as_json)
    scale = rep.summary["jet_scale"]
    budget = kw["tolerance"] * scale if scale > 0 else kw["tolerance"]
    payload = {
        "report": str(out / "jump_report.json"),
        "probes_used": int(len(probes)),
        "max_err": rep.summary["max_err"],
        "median_err": rep.summary["median_err"],
        "jet_scale": scale,
        "budget": budget,
        "side": sol.side,
    }
    if rep.summary["max_err"] > budget:
        _emit(payload, as_json)
        _fail(EXIT_VERIFY, f"max error {rep.summary['max_err']:.4g} exceeds budget {budget:.4g}", as_json)
    _emit(payload, as_json)


@main.command("verify")
@click.option("--report", "report_path", type=click.Path(), required=True)
@click.option("--tolerance", type=float, default=0.1, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def verify(report_path, tolerance, as_json):
    """Re-check a saved jump report against a tolerance."""
    try:
        data = json.loads(pathlib.Path(report_path).read_text())
    except OSError as exc:
        _fail(EXIT_IO, str(exc), as_json)
    except json.JSONDecodeError as exc:
        _fail(EXIT_INVALID, f"malformed report: {exc}", as_json)
    try:
        max_err = float(data["summary"]["max_err"])
        scale = float(data["summary"].get("jet_scale", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        _fail(EXIT_INVALID, f"incomplete report: {exc}", as_json)
    budget = tolerance * scale if scale > 0 else tolerance
    payload = {"max_err": max_err, "budget": budget, "passed": max_err <= budget}
    _emit(payload, as_json)
    if max_err > budget:
        sys.exit(EXIT_VERIFY)


@main.command("report")
@click.argument("curves", nargs=-1, type=click.Path(), required=True)
@click.option("--out", type=click.Path(), default="curves.svg", show_default=True)
@click.option("--title", default="log-log scaling fits", show_default=True)
@click.option("--json", "as_json", is_flag=True)
def report(curves, out, title, as_json):
    """Render scaling-curve CSVs as a deterministic SVG of log-log fits."""
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "cliffrac"
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for path in curves:
        try:
            rows = pathlib.Path(path).read_text().strip().splitlines()
        except OSError as exc:
            _fail(EXIT_IO, str(exc), as_json)
        pts = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
        if pts.size == 0 or np.any(pts <= 0):
            _fail(EXIT_INVALID, f"curve {path} is empty or not positive", as_json)
        x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
        slope, icept = np.polyfit(x, y, 1)
        ax.plot(x, y, "o", markersize=3, label=f"{pathlib.Path(path).stem}: slope {slope:.3f}")
        ax.plot(x, slope * x + icept, "-", linewidth=0.8)
    ax.set_xlabel("log scale")
    ax.set_ylabel("log value")
    ax.set_title(title)
    ax.legend(fontsize=7)
    try:
        fig.savefig(out, format="svg", metadata={"Date": None})
    except OSError as exc:
        _fail(EXIT_IO, str(exc), as_json)
    _emit({"figure": str(out), "curves": len(curves)}, as_json)


if __name__ == "__main__":
    main()
