import numpy as np
import pytest

from floodwalk import LABEL_BUILDING, LABEL_GROUND, LABEL_SKY
from floodwalk.bvh import build_accel, raycast
from floodwalk.citymodel import build_terrain, extrude_footprints, merge
from floodwalk.geom import quat_from_axis_angle, quat_rotate
from floodwalk.ingest import Footprint, FootprintSet
from floodwalk.spherical import (
    CameraPose,
    ProjectionError,
    dir_to_pixel,
    pixel_to_dir,
    render_labels,
)

W, H = 1024, 512
IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


class TestPixelToDir:
    def test_forward_center(self):
        d = pixel_to_dir(511.5, 255.5, W, H)
        np.testing.assert_allclose(d, [1.0, 0.0, 0.0], atol=1e-12)

    def test_top_row_near_up(self):
        d = pixel_to_dir(100, 0, W, H)
        # elevation within half a pixel of the pole
        assert np.arccos(np.clip(d[2], -1, 1)) < np.pi / H

    def test_three_quarter_width_is_right(self):
        d = pixel_to_dir(3 * W / 4 - 0.5, 255.5, W, H)
        np.testing.assert_allclose(d, [0.0, -1.0, 0.0], atol=1e-12)

    def test_quarter_width_is_left(self):
        d = pixel_to_dir(W / 4 - 0.5, 255.5, W, H)
        np.testing.assert_allclose(d, [0.0, 1.0, 0.0], atol=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(ProjectionError):
            pixel_to_dir(-1, 0, W, H)
        with pytest.raises(ProjectionError):
            pixel_to_dir(0, H, W, H)

    def test_all_pixels_unit_norm(self):
        uu, vv = np.meshgrid(np.arange(64), np.arange(32))
        d = pixel_to_dir(uu.ravel(), vv.ravel(), 64, 32)
        np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12)


class TestDirToPixel:
    def test_forward_maps_to_center(self):
        u, v = dir_to_pixel([1.0, 0.0, 0.0], W, H)
        assert (u, v) == (511.5, 255.5)

    def test_pole_maps_to_negative_half(self):
        _, v = dir_to_pixel([0.0, 0.0, 1.0], W, H)
        assert v == pytest.approx(-0.5)

    def test_zero_vector_rejected(self):
        with pytest.raises(ProjectionError, match="zero"):
            dir_to_pixel([0.0, 0.0, 0.0], W, H)

    def test_round_trip_10k_random_directions(self):
        rng = np.random.default_rng(123)
        d = rng.normal(size=(10_000, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        u, v = dir_to_pixel(d, W, H)
        # azimuth wraps (period W, same direction); clamping v near the
        # poles moves the elevation by at most half a pixel
        u = u % W
        v = np.clip(v, 0.0, H - 1.0)
        d2 = pixel_to_dir(u, v, W, H)
        ang = np.arccos(np.clip(np.einsum("ij,ij->i", d, d2), -1.0, 1.0))
        assert np.all(ang < 2 * np.pi / W)

    def test_pixel_round_trip_all_pixels_exact(self):
        w, h = 64, 32
        uu, vv = np.meshgrid(np.arange(w), np.arange(h))
        d = pixel_to_dir(uu.ravel(), vv.ravel(), w, h)
        u2, v2 = dir_to_pixel(d, w, h)
        np.testing.assert_allclose(u2, uu.ravel(), atol=1e-9)
        np.testing.assert_allclose(v2, vv.ravel(), atol=1e-9)


def flat_world(flat_dem, n=41):
    return build_accel(build_terrain(flat_dem(z=0.0, n=n, spacing=5.0, x0=-(n - 1) * 2.5,
                                              y0=(n - 1) * 2.5)))


class TestRenderLabels:
    def test_horizon_at_half_height(self, flat_dem):
        accel = flat_world(flat_dem)
        img = render_labels(accel, CameraPose(np.zeros(3) + [0, 0, 1.6], IDENTITY), 64, 32)
        assert np.all(img.labels[:16, :] == LABEL_SKY)
        assert np.all(img.labels[16:, :] == LABEL_GROUND)

    def test_closed_box_no_sky(self, flat_dem):
        dem = flat_dem(z=0.0)
        box = Footprint(
            id="box", exterior=np.array([[-6, -6], [6, -6], [6, 6], [-6, 6]], dtype=np.float64)
        )
        buildings, _ = extrude_footprints(FootprintSet((box,)), dem, 20.0)
        accel = build_accel(merge([build_terrain(dem), buildings]))
        img = render_labels(accel, CameraPose(np.array([0.0, 0.0, 5.0]), IDENTITY), 64, 32)
        assert np.count_nonzero(img.labels == LABEL_SKY) == 0

    def test_wall_angular_subtense(self, flat_dem):
        # 10 m-wide wall face 5 m ahead: horizontal angular half-width is
        # atan(5/5) = 45 deg, so the building span on the middle row should
        # be 90deg/360deg of the width within a pixel on each side
        dem = flat_dem(z=0.0)
        wall = Footprint(
            id="w", exterior=np.array([[5, -5], [8, -5], [8, 5], [5, 5]], dtype=np.float64)
        )
        buildings, _ = extrude_footprints(FootprintSet((wall,)), dem, 20.0)
        accel = build_accel(merge([build_terrain(dem), buildings]))
        w, h = 512, 256
        img = render_labels(accel, CameraPose(np.array([0.0, 0.0, 1.6]), IDENTITY), w, h)
        row = img.labels[h // 2, :]
        expected = w * (2 * np.arctan(5.0 / 5.0)) / (2 * np.pi)
        assert abs(np.count_nonzero(row == LABEL_BUILDING) - expected) <= 2

    def test_depth_equals_raycast(self, flat_dem):
        accel = flat_world(flat_dem)
        pose = CameraPose(np.array([1.0, -2.0, 1.6]),
                          quat_from_axis_angle([0, 0, 1], 0.7))
        w, h = 64, 32
        img = render_labels(accel, pose, w, h)
        rng = np.random.default_rng(0)
        for _ in range(30):
            u, v = int(rng.integers(0, w)), int(rng.integers(0, h))
            d_world = quat_rotate(pose.orientation, pixel_to_dir(u, v, w, h))
            hit = raycast(accel, pose.position, d_world)
            if hit is None:
                assert img.labels[v, u] == LABEL_SKY
                assert np.isinf(img.depth[v, u])
            else:
                assert img.depth[v, u] == hit.t

    def test_label_partition_total(self, flat_dem):
        accel = flat_world(flat_dem)
        img = render_labels(accel, CameraPose(np.array([0.0, 0.0, 1.6]), IDENTITY), 64, 32)
        counts = sum(int(np.count_nonzero(img.labels == l))
                     for l in (LABEL_GROUND, LABEL_BUILDING, LABEL_SKY))
        assert counts == 64 * 32

    def test_non_equirect_target_rejected(self, flat_dem):
        accel = flat_world(flat_dem)
        with pytest.raises(ProjectionError):
            render_labels(accel, CameraPose(np.array([0.0, 0.0, 1.6]), IDENTITY), 64, 64)

    def test_selective_render_matches_full_on_selected(self, flat_dem):
        accel = flat_world(flat_dem)
        pose = CameraPose(np.array([0.0, 0.0, 1.6]), IDENTITY)
        rng = np.random.default_rng(3)
        select = rng.random((32, 64)) < 0.4
        full = render_labels(accel, pose, 64, 32)
        part = render_labels(accel, pose, 64, 32, select=select)
        np.testing.assert_array_equal(full.labels[select], part.labels[select])
        np.testing.assert_array_equal(full.depth[select], part.depth[select])
        assert np.all(part.labels[~select] == LABEL_SKY)
        assert np.all(np.isinf(part.depth[~select]))

    def test_selective_render_bad_shape_rejected(self, flat_dem):
        accel = flat_world(flat_dem)
        pose = CameraPose(np.array([0.0, 0.0, 1.6]), IDENTITY)
        with pytest.raises(ProjectionError, match="selection"):
            render_labels(accel, pose, 64, 32, select=np.ones((8, 8), dtype=bool))
