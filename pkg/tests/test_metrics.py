"""Dimension and exponent estimators against analytic calibration shapes."""

import math
from fractions import Fraction

import numpy as np
import pytest

from cliffrac.geometry import (
    BallSolid,
    BoxSolid,
    Face,
    Rect,
    build_surface_spec,
    truncation_level,
    voxelize,
)
from cliffrac.metrics import (
    DimensionEstimate,
    ExponentEstimate,
    ScalingCurve,
    box_count,
    box_count_curve,
    inequality_report,
    marcinkiewicz_exponent,
    marcinkiewicz_integral,
    minkowski_dimension,
    neighborhood_volume,
    theoretical_values,
    volume_curve,
)

DISK_BOUNDS = Rect(np.full(2, -1.25), np.full(2, 1.25))


@pytest.fixture(scope="module")
def disk():
    return BallSolid(np.zeros(2), 1.0)


@pytest.fixture(scope="module")
def disk_dom(disk):
    return voxelize(disk, 10, bounds=DISK_BOUNDS)


@pytest.fixture(scope="module")
def disk_dom9(disk):
    return voxelize(disk, 9, bounds=DISK_BOUNDS)


@pytest.fixture(scope="module")
def family_dom():
    spec = build_surface_spec(1, 2, 3, truncation_level(3, 9))
    return voxelize(spec, 9)


@pytest.fixture(scope="module")
def cube_dom():
    cube = BoxSolid(Rect(np.zeros(3), np.ones(3)))
    return voxelize(cube, 8, bounds=Rect(np.full(3, -0.125), np.full(3, 1.125)))


class TestScalingCurve:
    def test_validation(self):
        with pytest.raises(ValueError):
            ScalingCurve(((0.5, 1.0), (0.5, 2.0)))
        with pytest.raises(ValueError):
            ScalingCurve(((0.5, 1.0), (0.25, 0.0)))
        with pytest.raises(ValueError):
            ScalingCurve(((0.5, 1.0),), "bogus")

    def test_csv_round_trip(self, tmp_path):
        for meaning, samples in [
            ("box_count", ((0.25, 10.0), (0.125, 25.0))),
            ("volume", ((0.5, 2.0), (0.25, 1.1))),
        ]:
            c = ScalingCurve(samples, meaning)
            p = tmp_path / f"{meaning}.csv"
            c.to_csv(p)
            back = ScalingCurve.from_csv(p)
            assert back.meaning == meaning
            np.testing.assert_allclose(back.scales(), c.scales(), rtol=1e-10)
            np.testing.assert_allclose(back.values(), c.values(), rtol=1e-10)


class TestBoxCount:
    def test_segment(self):
        seg = [Face(1, 0.0, np.array([0.0, 0.0]), np.array([1.0, 0.0]))]
        for k in (2, 4, 6):
            assert box_count(seg, k) == 2**k

    def test_single_point(self):
        assert box_count(np.array([[0.3, 0.7]]), 5) == 1
        assert box_count(np.array([[0.3, 0.7], [0.3, 0.7]]), 5) == 1

    def test_square_perimeter(self):
        assert box_count(BoxSolid(Rect(np.zeros(2), np.ones(2))), 3) == 28

    def test_voxel_dispatch(self, disk_dom, disk):
        assert box_count(disk_dom) == disk.count_boundary_cells(10, DISK_BOUNDS)
        with pytest.raises(ValueError):
            box_count(disk_dom, 9)

    def test_refinement_bounds(self):
        spec = build_surface_spec(1, 2, 3, 2)
        counts = [box_count(spec, k) for k in range(4, 9)]
        for a, b in zip(counts, counts[1:]):
            assert a <= b <= 4 * a


class TestMinkowskiDimension:
    def test_exact_power_laws(self):
        c1 = ScalingCurve(tuple((2.0**-k, 2.0**k) for k in range(4, 10)))
        est = minkowski_dimension(c1)
        assert est.value == pytest.approx(1.0, abs=1e-12)
        assert est.slope_stderr == pytest.approx(0.0, abs=1e-12)
        c2 = ScalingCurve(tuple((2.0**-k, 4.0**k) for k in range(4, 10)))
        assert minkowski_dimension(c2).value == pytest.approx(2.0, abs=1e-12)

    def test_too_few_samples(self):
        c = ScalingCurve(tuple((2.0**-k, 2.0**k) for k in range(3)))
        with pytest.raises(ValueError):
            minkowski_dimension(c)

    def test_flat_shapes(self):
        seg = [Face(1, 0.0, np.array([0.0, 0.0]), np.array([1.0, 0.0]))]
        est = minkowski_dimension(box_count_curve(seg, range(5, 11)))
        assert est.value == pytest.approx(1.0, abs=1e-12)
        sq = BoxSolid(Rect(np.zeros(2), np.ones(2)))
        assert minkowski_dimension(box_count_curve(sq, range(5, 11))).value == pytest.approx(
            1.0, abs=0.03
        )
        patch = [Face(2, 0.0, np.zeros(3), np.array([1.0, 1.0, 0.0]))]
        assert minkowski_dimension(box_count_curve(patch, range(3, 8))).value == pytest.approx(
            2.0, abs=1e-12
        )

    def test_staircase_family(self):
        spec = build_surface_spec(1, 2, 3, truncation_level(3, 12))
        est = minkowski_dimension(box_count_curve(spec, range(6, 13)))
        assert est.value == pytest.approx(1.5, abs=0.05)
        assert est.slope_stderr < 0.05


class TestNeighborhoodVolume:
    def test_disk_annuli(self, disk_dom):
        inner = neighborhood_volume(disk_dom, "inner", 0.5)
        assert inner == pytest.approx(math.pi * 0.75, rel=0.02)
        outer = neighborhood_volume(disk_dom, "outer", 0.2)
        assert outer == pytest.approx(math.pi * 0.44, rel=0.02)

    def test_monotone_and_saturating(self, disk_dom):
        ts = [0.05, 0.1, 0.2, 0.4, 0.8]
        vals = [neighborhood_volume(disk_dom, "inner", t) for t in ts]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        # saturation: every inner cell is within diam of the circle
        assert neighborhood_volume(disk_dom, "inner", 10.0) == pytest.approx(
            math.pi, rel=0.02
        )

    def test_bad_inputs(self, disk_dom):
        with pytest.raises(ValueError):
            neighborhood_volume(disk_dom, "inner", 0.0)
        with pytest.raises(ValueError):
            neighborhood_volume(disk_dom, "sideways", 0.1)
        with pytest.warns(UserWarning):
            neighborhood_volume(disk_dom, "inner", 0.5 * disk_dom.cell_edge)


class TestMarcinkiewiczIntegral:
    def test_p_zero_is_area(self, disk_dom9):
        assert marcinkiewicz_integral(disk_dom9, "inner", 0.0) == pytest.approx(
            math.pi, rel=0.02
        )

    def test_integrable_singularity(self, disk):
        # 2 pi * int_0^1 r (1-r)^{-1/2} dr = 8 pi / 3, truncated at one diagonal
        dom = voxelize(disk, 11, bounds=DISK_BOUNDS)
        got = marcinkiewicz_integral(dom, "inner", 0.5)
        assert got == pytest.approx(8 * math.pi / 3, rel=0.05)

    def test_divergent_p_grows_across_depths(self, disk, disk_dom):
        coarse = voxelize(disk, 8, bounds=DISK_BOUNDS)
        assert marcinkiewicz_integral(disk_dom, "inner", 1.2) > 1.15 * marcinkiewicz_integral(
            coarse, "inner", 1.2
        )

    def test_monotone_in_p_on_family(self, family_dom):
        # all resolvable distances are < 1 here, so t^-p increases with p
        vals = [marcinkiewicz_integral(family_dom, s, p) for s in ("inner", "outer") for p in (0.0, 0.5, 1.0)]
        assert vals[0] <= vals[1] <= vals[2]
        assert vals[3] <= vals[4] <= vals[5]

    def test_negative_p_rejected(self, family_dom):
        with pytest.raises(ValueError):
            marcinkiewicz_integral(family_dom, "inner", -0.1)


class TestMarcinkiewiczExponent:
    def test_disk_both_sides(self, disk_dom):
        for side in ("inner", "outer"):
            est = marcinkiewicz_exponent(disk_dom, side)
            assert est.value == pytest.approx(1.0, abs=0.05)
            assert est.method == "volume_slope"

    def test_cube_inner(self, cube_dom):
        assert marcinkiewicz_exponent(cube_dom, "inner").value == pytest.approx(1.0, abs=0.05)

    def test_absolute_is_max(self, disk_dom):
        a = marcinkiewicz_exponent(disk_dom, "absolute")
        i = marcinkiewicz_exponent(disk_dom, "inner")
        o = marcinkiewicz_exponent(disk_dom, "outer")
        assert a.value == max(i.value, o.value)

    def test_ip_sweep_cross_check(self, disk, disk_dom9):
        doms = [voxelize(disk, 7, bounds=DISK_BOUNDS), voxelize(disk, 8, bounds=DISK_BOUNDS), disk_dom9]
        est = marcinkiewicz_exponent(doms, "inner", method="ip_sweep")
        # the sweep only brackets the exponent; see module docstring
        assert 0.45 <= est.value <= 1.35

    def test_family_inner_dominates_theory_gap(self, family_dom):
        est = marcinkiewicz_exponent(family_dom, "inner")
        assert est.value >= 0.70

    def test_inequality_property(self, disk_dom, family_dom):
        # m + dim >= n + 1 - 0.1 on every estimated pair
        for dom, solid_or_spec, n in [
            (disk_dom, BallSolid(np.zeros(2), 1.0), 1),
            (family_dom, build_surface_spec(1, 2, 3, truncation_level(3, 9)), 1),
        ]:
            dim = minkowski_dimension(box_count_curve(solid_or_spec, range(5, 10))).value
            m = marcinkiewicz_exponent(dom, "absolute").value
            assert m + dim >= n + 1 - 0.1

    def test_unknown_method(self, disk_dom):
        with pytest.raises(ValueError):
            marcinkiewicz_exponent(disk_dom, "inner", method="psychic")


class TestTheory:
    def test_closed_forms(self):
        tv = theoretical_values(build_surface_spec(1, 2, 3, 1))
        assert tv.dim_exact == Fraction(3, 2) and tv.m_lower_exact == Fraction(3, 4)
        tv = theoretical_values(build_surface_spec(2, 3, 6, 1))
        assert tv.dim_exact == Fraction(18, 7) and tv.m_lower_exact == Fraction(17, 21)
        tv = theoretical_values(build_surface_spec(1, 1, 1, 1))
        assert tv.dim_exact == 1 and tv.m_lower_exact == 1

    def test_alpha_one_identity(self):
        # at alpha = 1 the two closed forms satisfy m_lower + dim = n + 1 exactly
        for n, beta in [(1, 1), (1, 3), (2, 5), (3, 7)]:
            tv = theoretical_values(build_surface_spec(n, 1, beta, 1))
            assert tv.m_lower_exact + tv.dim_exact == n + 1


class TestInequalityReport:
    def test_strict_case(self):
        r = inequality_report(1.5, 0.75, 1)
        assert r["margin"] == pytest.approx(0.25)
        assert r["relation"] == "strict"

    def test_equality_cases(self):
        assert inequality_report(1.0, 1.0, 1)["relation"] == "equality"
        r = inequality_report(2.25, 0.75, 2)
        assert r["margin"] == pytest.approx(0.0, abs=1e-12)
        assert r["relation"] == "equality"

    def test_accepts_estimate_objects(self):
        d = DimensionEstimate(1.5, 0.01, (6, 12), 1.6)
        e = ExponentEstimate("inner", 0.8, "volume_slope")
        assert inequality_report(d, e, 1)["margin"] == pytest.approx(0.3)


class TestVolumeCurve:
    def test_meaning_and_order(self, disk_dom):
        c = volume_curve(disk_dom, "inner")
        assert c.meaning == "volume"
        s = c.scales()
        assert np.all(np.diff(s) < 0)
