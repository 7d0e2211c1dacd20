import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import raytrace_pixel
from waterline.errors import ConfigError
from waterline.features import ChartQuery, ImuSample
from waterline.geometry import (
    CameraModel,
    PixelPoint,
    in_frame,
    orientation_matrix,
    project,
    world_point,
)

from conftest import random_imu, random_query


class TestWorldPoint:
    def test_dead_ahead(self):
        p = world_point(ChartQuery(100.0, 0.0))
        assert (p.x, p.y, p.z) == (0.0, 100.0, 0.0)

    def test_pure_starboard(self):
        p = world_point(ChartQuery(100.0, 90.0))
        assert p.x == pytest.approx(100.0, rel=1e-15)
        assert p.y == pytest.approx(0.0, abs=1e-12)
        assert p.z == 0.0

    def test_thirty_degrees(self):
        # closed form: 50 sin(30) = 25, 50 cos(30) = 25 sqrt(3)
        p = world_point(ChartQuery(50.0, 30.0))
        assert p.x == pytest.approx(25.0, rel=1e-12)
        assert p.y == pytest.approx(43.30127018922193, rel=1e-12)

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            world_point(ChartQuery(0.0, 10.0))
        with pytest.raises(ValueError):
            world_point(ChartQuery(-5.0, 10.0))

    def test_rejects_out_of_range_bearing(self):
        with pytest.raises(ValueError):
            world_point(ChartQuery(5.0, 181.0))


class TestOrientationMatrix:
    def test_identity_at_zero(self):
        r = orientation_matrix(ImuSample(0.0, 0.0, 0.0))
        assert np.array_equal(r, np.eye(3))

    def test_heading_half_turn(self):
        r = orientation_matrix(ImuSample(0.0, 0.0, 180.0))
        expected = np.diag([-1.0, -1.0, 1.0])
        assert np.allclose(r, expected, atol=1e-12)

    def test_heading_rotates_forward_axis_toward_east(self):
        # compass sense: heading 90 deg points the bow east (+x)
        r = orientation_matrix(ImuSample(0.0, 0.0, 90.0))
        forward_in_ref = r @ np.array([0.0, 1.0, 0.0])
        assert np.allclose(forward_in_ref, [1.0, 0.0, 0.0], atol=1e-12)

    def test_positive_pitch_lifts_bow(self):
        r = orientation_matrix(ImuSample(10.0, 0.0, 0.0))
        forward_in_ref = r @ np.array([0.0, 1.0, 0.0])
        assert forward_in_ref[2] > 0

    def test_positive_roll_dips_starboard(self):
        r = orientation_matrix(ImuSample(0.0, 10.0, 0.0))
        starboard_in_ref = r @ np.array([1.0, 0.0, 0.0])
        assert starboard_in_ref[2] < 0

    @settings(max_examples=100, deadline=None)
    @given(
        pitch=st.floats(-90, 90),
        roll=st.floats(-90, 90),
        heading=st.floats(-180, 180),
    )
    def test_orthonormal_with_unit_determinant(self, pitch, roll, heading):
        r = orientation_matrix(ImuSample(pitch, roll, heading))
        assert np.abs(r @ r.T - np.eye(3)).max() < 1e-12
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_out_of_range_pitch(self):
        with pytest.raises(ValueError):
            orientation_matrix(ImuSample(91.0, 0.0, 0.0))


class TestProject:
    def test_on_axis_hits_principal_column_exactly(self, camera):
        for heading in (0.0, 37.5, -120.0, 180.0):
            for d in (10.0, 100.0, 5000.0):
                p = project(camera, ImuSample(0.0, 0.0, heading), ChartQuery(d, 0.0))
                assert p.u == camera.principal_u

    def test_horizon_limit_at_zero_pitch(self, camera):
        p = project(camera, ImuSample(0.0, 0.0, 0.0), ChartQuery(1e9, 0.0))
        assert p.v > camera.principal_v
        assert p.v - camera.principal_v < 1e-5

    def test_depth_monotone_in_distance(self, camera):
        imu = ImuSample(0.0, 0.0, 0.0)
        distances = np.geomspace(5.0, 5000.0, 40)
        vs = [project(camera, imu, ChartQuery(d, 0.0)).v for d in distances]
        assert all(v > camera.principal_v for v in vs)
        assert all(a > b for a, b in zip(vs, vs[1:]))

    def test_roll_antisymmetry(self, camera):
        for roll in (3.0, 7.5, 15.0):
            plus = project(camera, ImuSample(0.0, roll, 0.0), ChartQuery(800.0, 0.0))
            minus = project(camera, ImuSample(0.0, -roll, 0.0), ChartQuery(800.0, 0.0))
            assert plus.u - camera.principal_u == pytest.approx(
                camera.principal_u - minus.u, abs=1e-9
            )
            assert plus.v == pytest.approx(minus.v, abs=1e-9)

    def test_behind_camera_returns_none(self, camera):
        assert project(camera, ImuSample(0.0, 0.0, 0.0), ChartQuery(100.0, 180.0)) is None
        assert project(camera, ImuSample(0.0, 0.0, 45.0), ChartQuery(50.0, -170.0)) is None

    def test_heading_does_not_move_the_pixel(self, camera):
        base = project(camera, ImuSample(2.0, -3.0, 0.0), ChartQuery(200.0, 12.0))
        for heading in (-180.0, -35.0, 90.0, 179.0):
            p = project(camera, ImuSample(2.0, -3.0, heading), ChartQuery(200.0, 12.0))
            assert p.u == base.u and p.v == base.v

    def test_frozen_raytrace_example(self, camera):
        # independent inverse ray-trace values for focal 600, principal
        # (480, 270), height 3 m, d = 100 m, bearing 10 deg, zero attitude
        p = project(camera, ImuSample(0.0, 0.0, 0.0), ChartQuery(100.0, 10.0))
        assert p.u == pytest.approx(585.796188425079, rel=1e-9)
        assert p.v == pytest.approx(288.2776790139434, rel=1e-9)
        uv = raytrace_pixel(camera, ImuSample(0.0, 0.0, 0.0), ChartQuery(100.0, 10.0))
        assert p.u == pytest.approx(uv[0], rel=1e-9)
        assert p.v == pytest.approx(uv[1], rel=1e-9)

    def test_raytrace_agreement_1000_random_configs(self):
        checked = 0
        for i in range(1000):
            rng = np.random.default_rng(7000 + i)
            cam = CameraModel(
                focal_px=rng.uniform(300, 1200),
                principal_u=rng.uniform(400, 560),
                principal_v=rng.uniform(200, 340),
                image_w=960,
                image_h=540,
                mount_height_m=rng.uniform(1.0, 10.0),
            )
            imu = random_imu(rng)
            query = random_query(rng)
            p = project(cam, imu, query)
            if p is None:
                continue
            uv = raytrace_pixel(cam, imu, query)
            assert uv is not None, f"oracle failed on config {i}"
            scale = max(1.0, abs(uv[0]), abs(uv[1]))
            assert abs(p.u - uv[0]) / scale < 1e-9
            assert abs(p.v - uv[1]) / scale < 1e-9
            checked += 1
        assert checked > 900


class TestInFrame:
    def test_center(self, camera):
        assert in_frame(camera, PixelPoint(480.0, 270.0))

    def test_negative_u(self, camera):
        assert not in_frame(camera, PixelPoint(-1.0, 270.0))

    def test_far_corner_convention(self, camera):
        assert in_frame(camera, PixelPoint(959.99, 539.99))
        assert not in_frame(camera, PixelPoint(960.0, 270.0))
        assert not in_frame(camera, PixelPoint(480.0, 540.0))

    def test_origin_is_inside(self, camera):
        assert in_frame(camera, PixelPoint(0.0, 0.0))


class TestCameraModel:
    def test_json_round_trip(self, camera, tmp_path):
        path = tmp_path / "camera.json"
        camera.save(path)
        loaded = CameraModel.load(path)
        assert loaded == camera
        data = json.loads(path.read_text())
        assert set(data) == {
            "focal_px",
            "principal_u",
            "principal_v",
            "image_w",
            "image_h",
            "mount_height_m",
        }

    def test_rejects_bad_values(self):
        with pytest.raises(ConfigError):
            CameraModel(-1.0, 480, 270, 960, 540, 3.0)
        with pytest.raises(ConfigError):
            CameraModel(600.0, 2000.0, 270, 960, 540, 3.0)
        with pytest.raises(ConfigError):
            CameraModel(600.0, 480, 270, 960, 540, 0.0)

    def test_load_rejects_missing_key(self, camera, tmp_path):
        path = tmp_path / "camera.json"
        data = camera.to_dict()
        del data["focal_px"]
        path.write_text(json.dumps(data))
        with pytest.raises(ConfigError, match="focal_px"):
            CameraModel.load(path)

    def test_load_rejects_bad_json(self, tmp_path):
        path = tmp_path / "camera.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            CameraModel.load(path)


class TestProjectionGeometryConsistency:
    def test_bearing_moves_pixel_rightward(self, camera):
        imu = ImuSample(0.0, 0.0, 0.0)
        left = project(camera, imu, ChartQuery(200.0, -10.0))
        right = project(camera, imu, ChartQuery(200.0, 10.0))
        assert left.u < camera.principal_u < right.u

    def test_pitch_up_moves_water_down_in_image(self, camera):
        level = project(camera, ImuSample(0.0, 0.0, 0.0), ChartQuery(300.0, 0.0))
        bow_up = project(camera, ImuSample(8.0, 0.0, 0.0), ChartQuery(300.0, 0.0))
        assert bow_up.v > level.v
