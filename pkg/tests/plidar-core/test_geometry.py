import numpy as np
import pytest
from pydantic import ValidationError

from plidar.core.errors import EmptyInputError
from plidar.core.geometry import (
    CameraCalib,
    DepthMap,
    DisparityMap,
    PointCloud,
    backproject,
    depth_error_bound,
    depth_shift,
    depth_to_disparity,
    disparity_to_depth,
    project,
)


def test_calib_validation():
    with pytest.raises(ValidationError):
        CameraCalib(f_u=-1.0, f_v=1.0, c_u=0.0, c_v=0.0, baseline_m=0.5)
    with pytest.raises(ValidationError):
        CameraCalib(f_u=1.0, f_v=1.0, c_u=0.0, c_v=0.0, baseline_m=0.0)


def test_from_projections(kitti_calib):
    P2 = np.array([[721.0, 0, 609.56, 44.85], [0, 721.0, 172.85, 0.2163], [0, 0, 1, 0.00274]])
    P3 = P2.copy()
    P3[0, 3] = 44.85 - 721.0 * 0.54
    calib = CameraCalib.from_projections(P2, P3)
    assert calib.f_u == 721.0
    assert calib.c_v == 172.85
    assert calib.baseline_m == pytest.approx(0.54, abs=1e-9)


def test_disparity_to_depth(kitti_calib):
    d_map = DisparityMap.from_array(
        np.array([[7.7868, kitti_calib.focal_baseline, 8.7868, 0.0]])
    )
    z_map = disparity_to_depth(d_map, kitti_calib)

    assert z_map.values[0, 0] == pytest.approx(50.0, rel=1e-4)
    assert z_map.values[0, 1] == 1.0
    assert z_map.values[0, 2] == pytest.approx(44.31, abs=0.01)
    assert z_map.values[0, 0] - z_map.values[0, 2] == pytest.approx(5.69, abs=0.01)
    assert not z_map.valid_mask[0, 3]


def test_depth_clamp(kitti_calib):
    # 389.34 / 4 > 80 m and 389.34 / 400 < 1 m
    d_map = DisparityMap.from_array(np.array([[4.0, 400.0, 10.0]]))
    z_map = disparity_to_depth(d_map, kitti_calib)
    assert z_map.valid_mask.tolist() == [[False, False, True]]
    assert z_map.values[0, 0] == 0.0


def test_empty_map(kitti_calib):
    with pytest.raises(EmptyInputError):
        disparity_to_depth(DisparityMap.from_array(np.zeros((0, 4))), kitti_calib)


def test_reciprocity(kitti_calib, rng):
    d = rng.uniform(5.0, 300.0, (40, 60))
    d_map = DisparityMap.from_array(d)
    back = depth_to_disparity(disparity_to_depth(d_map, kitti_calib), kitti_calib)
    assert np.all(back.valid_mask)
    assert np.allclose(back.values, d, rtol=1e-12, atol=0)


def test_map_validation():
    with pytest.raises(ValidationError):
        DepthMap(values=np.array([[1.0, -1.0]]), valid_mask=np.array([[True, True]]))
    with pytest.raises(ValidationError):
        DepthMap(values=np.ones((2, 2)), valid_mask=np.ones((2, 3), dtype=bool))

    z_map = DepthMap.from_array(np.array([[1.0, np.nan, -2.0, np.inf]]))
    assert z_map.valid_mask.tolist() == [[True, False, False, False]]
    assert z_map.n_valid == 1


def test_backproject(kitti_calib):
    values = np.zeros((400, 1400))
    values[172, 609] = 10.0
    values[10, 1330] = 5.0
    z_map = DepthMap.from_array(values)

    cloud = backproject(z_map, kitti_calib)
    assert len(cloud) == 2
    # row-major order
    assert cloud.source_pixels.tolist() == [[1330, 10], [609, 172]]
    assert cloud.depths.tolist() == [5.0, 10.0]

    principal = CameraCalib(f_u=721.0, f_v=721.0, c_u=609.0, c_v=172.0, baseline_m=0.54)
    point = backproject(z_map, principal).point(1)
    assert (point.x, point.y, point.z) == (0.0, 0.0, 10.0)
    assert point.source_pixel == (609, 172)

    shifted = CameraCalib(f_u=721.0, f_v=721.0, c_u=609.0, c_v=10.0, baseline_m=0.54)
    assert backproject(z_map, shifted).point(0).x == pytest.approx(5.0)


def test_one_focal_length_off_center():
    calib = CameraCalib(f_u=721.0, f_v=721.0, c_u=609.56, c_v=172.85, baseline_m=0.54)
    cloud = PointCloud(xyz=[[5.0, 0.0, 5.0]])
    projection = project(cloud, calib, (2000, 400))
    assert projection.uv[0, 0] == pytest.approx(609.56 + 721.0)


def test_project_roundtrip(kitti_calib, rng):
    values = rng.uniform(1.0, 80.0, (30, 50))
    values[rng.uniform(size=values.shape) < 0.3] = 0.0
    z_map = DepthMap.from_array(values)

    cloud = backproject(z_map, kitti_calib)
    assert np.array_equal(cloud.depths, values[z_map.valid_mask])

    projection = project(cloud, kitti_calib, (50, 30))
    assert len(projection) == len(cloud)
    assert np.max(np.abs(projection.uv - cloud.source_pixels)) < 1e-9
    assert np.array_equal(projection.pixels(), cloud.source_pixels)


def test_project_drops_points(kitti_calib):
    cloud = PointCloud(xyz=[[0.0, 0.0, 10.0], [0.0, 0.0, -1.0], [100.0, 0.0, 1.0]])
    projection = project(cloud, kitti_calib, (1242, 375))

    assert projection.indices.tolist() == [0]
    assert projection.uv[0].tolist() == [kitti_calib.c_u, kitti_calib.c_v]
    assert projection.z.tolist() == [10.0]
    assert projection.n_behind == 1
    assert projection.n_outside == 1


def test_depth_error_bound(kitti_calib):
    assert depth_error_bound(5.0, 1.0, kitti_calib) == pytest.approx(25 / 389.34)
    assert depth_error_bound(50.0, 1.0, kitti_calib) == pytest.approx(6.42, abs=0.01)
    assert depth_error_bound(50.0, 0.0, kitti_calib) == 0.0

    z = np.linspace(1.0, 80.0, 50)
    bound = depth_error_bound(z, 0.5, kitti_calib)
    assert np.all(np.diff(bound) > 0)
    assert np.allclose(depth_error_bound(2 * z, 0.5, kitti_calib), 4 * bound)


def test_depth_shift(kitti_calib):
    assert depth_shift(5.0, 1.0, kitti_calib) == pytest.approx(0.063, abs=1e-3)
    assert depth_shift(50.0, 1.0, kitti_calib) == pytest.approx(5.69, abs=0.01)
