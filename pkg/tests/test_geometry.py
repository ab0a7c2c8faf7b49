"""Staircase-surface geometry against brute-force face oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cliffrac.geometry import (
    LABEL_BOUNDARY,
    LABEL_INSIDE,
    LABEL_OUTSIDE,
    BallSolid,
    BoxSolid,
    Face,
    Rect,
    SurfaceSpec,
    VoxelDomain,
    build_surface_spec,
    distance_to_boundary,
    face_cells,
    membership,
    rectangle_list,
    truncation_level,
    voxelize,
)


def brute_distance(spec, points):
    """Oracle: min over every face of the truncated face list."""
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    d2 = np.full(p.shape[0], np.inf)
    for f in spec.faces():
        d2 = np.minimum(d2, f.distance_sq(p))
    return np.sqrt(d2)


class TestSpecConstruction:
    def test_level_one_quantities(self):
        spec = build_surface_spec(1, 1, 1, 1)
        assert spec.spacing(1) == 0.25
        assert spec.width(1) == 0.125
        assert spec.level_count(1) == 2

    def test_quadratic_width(self):
        spec = build_surface_spec(2, 2, 3, 4)
        assert spec.spacing(1) == 0.0625
        assert spec.width(1) == pytest.approx(0.0625**2 / 2)

    @pytest.mark.parametrize(
        "args", [(1, 0.5, 1, 1), (0, 1, 1, 1), (1, 1, 0.5, 1), (1, 1, 1, 0), (2, 1, 1, 1)]
    )
    def test_out_of_range_rejected(self, args):
        with pytest.raises(ValueError):
            build_surface_spec(*args)

    def test_json_round_trip(self, tmp_path):
        spec = build_surface_spec(1, 2.0, 3.0, 6)
        path = tmp_path / "spec.json"
        spec.save(path)
        assert SurfaceSpec.load(path) == spec


class TestRectangles:
    def test_level_one_boxes(self):
        rects = rectangle_list(build_surface_spec(1, 1, 1, 1), 1)
        assert len(rects) == 2
        np.testing.assert_allclose(rects[0].lo, [0.625, 0.0])
        np.testing.assert_allclose(rects[0].hi, [0.75, 0.5])
        np.testing.assert_allclose(rects[1].lo, [0.875, 0.0])
        np.testing.assert_allclose(rects[1].hi, [1.0, 0.5])

    def test_level_count_beta_three(self):
        assert len(rectangle_list(build_surface_spec(1, 2, 3, 1), 1)) == 8

    def test_level_out_of_range(self):
        spec = build_surface_spec(1, 1, 1, 1)
        with pytest.raises(ValueError):
            rectangle_list(spec, 0)
        with pytest.raises(ValueError):
            rectangle_list(spec, 2)

    @pytest.mark.parametrize("params", [(1, 1, 1, 3), (1, 2, 3, 2), (2, 1.5, 2, 2)])
    def test_pairwise_disjoint(self, params):
        spec = build_surface_spec(*params)
        rects = [r for m in range(1, spec.m_max + 1) for r in spec.rectangle_list(m)]
        for i in range(len(rects)):
            for j in range(i + 1, len(rects)):
                assert not rects[i].intersects(rects[j])


class TestMembership:
    def test_examples(self):
        spec = build_surface_spec(1, 1, 1, 1)
        assert membership(spec, (0.5, -0.5))
        assert membership(spec, (0.7, 0.3))  # interior of R_11
        assert not membership(spec, (0.5, 0.3))  # gap between boxes

    def test_boundary_points_are_inside(self):
        spec = build_surface_spec(1, 1, 1, 1)
        for x in [(0.0, 0.0), (1.0, -1.0), (0.75, 0.5), (0.625, 0.25)]:
            assert membership(spec, x)

    def test_matches_rect_union_oracle(self):
        spec = build_surface_spec(1, 2, 3, 3)
        rng = np.random.default_rng(10)
        pts = rng.uniform([-0.2, -1.2], [1.2, 0.6], size=(500, 2))
        boxes = [spec.base_box] + [
            r for m in range(1, 4) for r in spec.rectangle_list(m)
        ]
        oracle = np.zeros(500, dtype=bool)
        for b in boxes:
            oracle |= b.contains(pts)
        np.testing.assert_array_equal(spec.membership(pts), oracle)

    def test_truncation_monotone(self):
        coarse = build_surface_spec(1, 2, 3, 2)
        fine = build_surface_spec(1, 2, 3, 3)
        rng = np.random.default_rng(11)
        pts = rng.uniform([0.0, 0.0], [0.6, 0.3], size=(400, 2))
        inside_coarse = coarse.membership(pts)
        inside_fine = fine.membership(pts)
        assert np.all(inside_fine | ~inside_coarse)


class TestDistance:
    def test_below_base(self):
        spec = build_surface_spec(1, 1, 1, 1)
        assert distance_to_boundary(spec, (0.5, -1.1)) == pytest.approx(0.1)

    def test_far_point_matches_brute(self):
        spec = build_surface_spec(1, 1, 1, 1)
        d = distance_to_boundary(spec, (10.0, 0.0))
        assert d == pytest.approx(brute_distance(spec, (10.0, 0.0))[0], abs=1e-12)

    def test_on_face_is_zero(self):
        spec = build_surface_spec(1, 1, 1, 1)
        assert distance_to_boundary(spec, (0.75, 0.25)) == 0.0
        assert distance_to_boundary(spec, (0.9, 0.5)) == 0.0

    @pytest.mark.parametrize("params", [(1, 1, 1, 3), (1, 1.5, 2, 3), (2, 2, 3, 2)])
    def test_random_points_match_brute(self, params):
        spec = build_surface_spec(*params)
        rng = np.random.default_rng(12)
        d = spec.dim
        lo = np.full(d, -0.4)
        hi = np.full(d, 1.4)
        lo[-1], hi[-1] = -1.4, 0.7
        pts = rng.uniform(lo, hi, size=(300, d))
        np.testing.assert_allclose(
            spec.boundary_distance(pts), brute_distance(spec, pts), atol=1e-12
        )

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_lipschitz(self, seed):
        spec = build_surface_spec(1, 2, 3, 3)
        rng = np.random.default_rng(seed)
        a = rng.uniform([-1, -2], [2, 1], size=(20, 2))
        b = a + rng.normal(scale=0.1, size=(20, 2))
        gap = np.abs(spec.boundary_distance(a) - spec.boundary_distance(b))
        assert np.all(gap <= np.linalg.norm(a - b, axis=1) + 1e-12)


class TestFaceCells:
    def test_segment(self):
        seg = Face(1, 0.0, np.array([0.0, 0.0]), np.array([1.0, 0.0]))
        for k in (1, 3, 5):
            assert len(face_cells([seg], k)) == 2**k

    def test_unit_square_perimeter(self):
        faces = BoxSolid(Rect(np.zeros(2), np.ones(2))).faces()
        assert len(face_cells(faces, 3)) == 4 * 8 - 4

    def test_cube_surface(self):
        faces = BoxSolid(Rect(np.zeros(3), np.ones(3))).faces()
        # 8^3 block minus the 6^3 strict interior
        assert len(face_cells(faces, 3)) == 8**3 - 6**3

    def test_refinement_nesting(self):
        spec = build_surface_spec(1, 2, 3, 2)
        coarse = face_cells(spec.faces(), 4)
        fine = face_cells(spec.faces(), 5)
        parents = np.unique(np.floor_divide(fine, 2), axis=0)
        coarse_set = {tuple(c) for c in coarse}
        assert coarse_set <= {tuple(p) for p in parents}

    def test_cap_enforced(self, monkeypatch):
        monkeypatch.setenv("CLIFFRAC_MAX_CELLS", "10")
        spec = build_surface_spec(1, 1, 1, 1)
        with pytest.raises(MemoryError):
            face_cells(spec.faces(), 6)


class TestVoxelize:
    def test_labels_partition_and_dist_consistency(self):
        spec = build_surface_spec(1, 1, 1, 1)
        dom = voxelize(spec, 3)
        assert set(np.unique(dom.labels)) <= {LABEL_BOUNDARY, LABEL_INSIDE, LABEL_OUTSIDE}
        assert np.all(dom.dist >= 0)
        # every boundary cell's closed cube meets the surface
        bidx = dom.side_indices(LABEL_BOUNDARY)
        half_diag = 0.5 * dom.cell_edge * np.sqrt(2)
        assert np.all(dom.dist[bidx] <= half_diag + 1e-12)

    def test_base_face_cells_tagged(self):
        spec = build_surface_spec(1, 1, 1, 1)
        dom = voxelize(spec, 3)
        # cells just inside the bottom face y = -1 and side face x = 0
        for x in [(0.5, -1.0 + 0.01), (0.01, -0.5), (1.0 - 0.01, -0.5), (0.7, 0.5 - 0.01)]:
            assert dom.labels[dom.cell_containing(x)[0]] == LABEL_BOUNDARY

    def test_boundary_count_matches_face_enumeration(self):
        spec = build_surface_spec(1, 2, 3, 2)
        dom = voxelize(spec, 6)
        assert dom.boundary_count() == len(face_cells(spec.faces(), 6))

    def test_membership_labels(self):
        spec = build_surface_spec(1, 1, 1, 2)
        dom = voxelize(spec, 4)
        inside = dom.side_centers(LABEL_INSIDE)
        outside = dom.side_centers(LABEL_OUTSIDE)
        assert np.all(spec.membership(inside))
        assert not np.any(spec.membership(outside))

    def test_cell_cap(self, monkeypatch):
        monkeypatch.setenv("CLIFFRAC_MAX_CELLS", "100")
        with pytest.raises(MemoryError):
            voxelize(build_surface_spec(1, 1, 1, 1), 5)

    def test_misaligned_bounds_rejected(self):
        bad = Rect(np.array([-0.3, -1.5]), np.array([1.5, 0.5]))
        with pytest.raises(ValueError):
            voxelize(build_surface_spec(1, 1, 1, 1), 3, bounds=bad)

    def test_save_load_round_trip(self, tmp_path):
        dom = voxelize(build_surface_spec(1, 1, 1, 1), 4)
        p1, p2 = tmp_path / "a.vox", tmp_path / "b.vox"
        dom.save(p1)
        back = VoxelDomain.load(p1)
        back.save(p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert np.array_equal(back.labels, dom.labels)
        np.testing.assert_allclose(back.dist, dom.dist, atol=1e-7)
        assert back.k == dom.k and back.shape == dom.shape


class TestCalibrationShapes:
    def test_ball_queries(self):
        ball = BallSolid(np.zeros(2), 1.0)
        assert ball.membership([0.5, 0.5])
        assert not ball.membership([1.0, 1.0])
        assert ball.boundary_distance([0.0, 0.0]) == pytest.approx(1.0)
        assert ball.boundary_distance([2.0, 0.0]) == pytest.approx(1.0)

    @pytest.mark.parametrize("dim,k", [(2, 5), (2, 6), (3, 4)])
    def test_slab_count_matches_full_grid(self, dim, k):
        ball = BallSolid(np.zeros(dim), 1.0)
        bounds = Rect(np.full(dim, -1.25), np.full(dim, 1.25))
        e = 2.0**-k
        axes = [bounds.lo[ax] + (np.arange(int(round(2.5 * 2**k))) + 0.5) * e for ax in range(dim)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        brute = int(np.count_nonzero(ball.boundary_cell_mask(grid, e / 2)))
        assert ball.count_boundary_cells(k, bounds) == brute

    def test_slab_count_matches_voxelize(self):
        ball = BallSolid(np.zeros(2), 1.0)
        bounds = Rect(np.full(2, -1.25), np.full(2, 1.25))
        dom = voxelize(ball, 5, bounds=bounds)
        assert dom.boundary_count() == ball.count_boundary_cells(5, bounds)

    def test_disk_count_scales_like_circumference(self):
        ball = BallSolid(np.zeros(2), 1.0)
        n9 = ball.count_boundary_cells(9)
        n10 = ball.count_boundary_cells(10)
        assert 1.8 < n10 / n9 < 2.2

    def test_box_solid_voxelize(self):
        box = BoxSolid(Rect(np.zeros(2), np.ones(2)))
        dom = voxelize(box, 3, bounds=Rect(np.full(2, -0.5), np.full(2, 1.5)))
        assert dom.boundary_count() == 28
        assert np.count_nonzero(dom.labels == LABEL_INSIDE) > 0


class TestTruncationLevel:
    def test_values(self):
        assert truncation_level(3.0, 12) == 3
        assert truncation_level(1.0, 10) == 5
        assert truncation_level(3.0, 4) == 1
