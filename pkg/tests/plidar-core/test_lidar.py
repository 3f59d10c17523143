import numpy as np
import pytest
from pydantic import ValidationError
from scipy.spatial.transform import Rotation

from plidar.core.errors import DegenerateGeometryError, ShapeMismatchError
from plidar.core.geometry import DepthMap, PointCloud
from plidar.core.lidar import (
    AXIS_PERMUTATION,
    BeamSelection,
    LidarScan,
    beam_index,
    camera_to_lidar,
    check_extrinsics,
    elevation_angle,
    lidar_to_camera,
    pseudo_lidar_scan,
    sparsify,
)


def ray(theta_deg, distance=10.0, azimuth_deg=0.0):
    theta, phi = np.radians(theta_deg), np.radians(azimuth_deg)
    return distance * np.array(
        [np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), np.sin(theta)]
    )


@pytest.fixture
def hemisphere(rng):
    """Returns in every direction; reflectance doubles as a return id"""
    xyz = rng.normal(size=(5000, 3))
    xyz *= rng.uniform(2.0, 60.0, (5000, 1)) / np.linalg.norm(xyz, axis=1, keepdims=True)
    return LidarScan.from_xyz(xyz, np.arange(5000.0))


def test_elevation_angle():
    assert elevation_angle([1.0, 0.0, 0.0]) == 0.0
    assert elevation_angle([1.0, 0.0, 1.0]) == pytest.approx(45.0)
    two = np.radians(2.0)
    assert elevation_angle([np.cos(two), 0.0, -np.sin(two)]) == pytest.approx(-2.0, abs=1e-9)

    many = elevation_angle(np.array([[0.0, 3.0, 3.0, 0.2], [0.0, 0.0, -5.0, 0.0]]))
    assert np.allclose(many, [45.0, -90.0])


def test_elevation_at_origin():
    with pytest.raises(DegenerateGeometryError):
        elevation_angle([0.0, 0.0, 0.0])


def test_beam_index_snaps_to_edge():
    assert beam_index(-23.6) == 0
    assert beam_index(-2.0) == 54
    assert beam_index(-2.2) == 53
    assert beam_index(1.99) == 63


def test_sparsify_boundaries():
    scan = LidarScan.from_xyz([ray(-2.2), ray(-2.0), ray(-1.4), ray(0.1)], [0.1, 0.2, 0.3, 0.4])
    kept = sparsify(scan, BeamSelection.from_preset("4"))

    assert kept.reflectance.tolist() == [0.1, 0.3, 0.4]
    assert np.array_equal(kept.points, scan.points[[0, 2, 3]])


def test_sparsify_just_below_lower_edge():
    scan = LidarScan.from_xyz([ray(-2.4000000001), ray(-2.4 + 1e-10), ray(-2.0000000001)])
    kept = sparsify(scan, BeamSelection.from_preset("4"))
    assert np.array_equal(kept.points, scan.points[[1, 2]])

    assert beam_index(-2.4000000001) == 52
    assert beam_index(-2.4 + 1e-10) == 53


def test_contains_matches_beam_index():
    selection = BeamSelection.from_preset("4")
    theta = np.linspace(-4.0, 1.0, 2001)
    assert np.array_equal(selection.contains(theta), np.isin(beam_index(theta), selection.bins()))


def test_sparsify_empty():
    scan = LidarScan.from_xyz([ray(-2.2)])
    assert len(sparsify(scan, BeamSelection())) == 0
    assert len(sparsify(LidarScan(points=[]), BeamSelection.from_preset("4"))) == 0


def test_sparsify_skips_origin():
    scan = LidarScan.from_xyz([[0.0, 0.0, 0.0], ray(-2.2)])
    assert len(sparsify(scan, BeamSelection.from_preset("4"))) == 1


def test_sparsify_idempotent(hemisphere):
    selection = BeamSelection.from_preset("4")
    once = sparsify(hemisphere, selection)
    assert np.array_equal(sparsify(once, selection).points, once.points)


def test_two_beams_within_four(hemisphere):
    two = sparsify(hemisphere, BeamSelection.from_preset("2"))
    four = sparsify(hemisphere, BeamSelection.from_preset("4"))
    assert len(two) < len(four)
    assert np.all(np.isin(two.reflectance, four.reflectance))


@pytest.mark.parametrize(
    "name, expected_bins", [("2", [53, 57]), ("4", [53, 55, 57, 59]), ("64", list(range(64)))]
)
def test_presets_route_bin_centers(name, expected_bins):
    centers = BeamSelection.from_preset("64").bin_centers()
    scan = LidarScan.from_xyz(np.array([ray(theta, azimuth_deg=5.0) for theta in centers]))

    selection = BeamSelection.from_preset(name)
    assert selection.bins().tolist() == expected_bins

    kept = sparsify(scan, selection)
    routed = beam_index(elevation_angle(kept.xyz))
    assert routed.tolist() == expected_bins


def test_preset_names():
    assert BeamSelection.preset_names() == ["2", "4", "64"]
    with pytest.raises(ValueError):
        BeamSelection.from_preset("16")


def test_interval_validation():
    with pytest.raises(ValidationError):
        BeamSelection(selected_intervals=[(-2.3, -2.0)])
    with pytest.raises(ValidationError):
        BeamSelection(selected_intervals=[(-2.0, -2.4)])
    with pytest.raises(ValidationError):
        BeamSelection(selected_intervals=[(-2.4, -1.6), (-2.0, -1.2)])
    with pytest.raises(ValidationError):
        BeamSelection(bin_step_deg=0.0)

    adjacent = BeamSelection(selected_intervals=[(-2.4, -2.0), (-2.0, -1.6)])
    assert adjacent.bins().tolist() == [53, 54]


def test_scan_validation():
    with pytest.raises(ValidationError):
        LidarScan(points=np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        LidarScan(points=[[1.0, 0.0, np.nan, 0.0]])


def test_axis_permutation():
    cloud = lidar_to_camera(LidarScan.from_xyz([[10.0, 2.0, 1.0]]))
    assert cloud.xyz.tolist() == [[-2.0, -1.0, 10.0]]


def test_drops_points_behind_camera(hemisphere):
    cloud = lidar_to_camera(hemisphere)
    assert len(cloud) == int((hemisphere.xyz[:, 0] > 0).sum())
    assert np.all(cloud.xyz[:, 2] > 0)


def test_inverse_transform(hemisphere):
    rotation = Rotation.random(random_state=7).as_matrix()
    extrinsics = np.column_stack([rotation, [0.27, -0.08, -0.06]])

    in_front = (hemisphere.xyz @ rotation.T + extrinsics[:, 3])[:, 2] > 0
    cloud = lidar_to_camera(hemisphere, extrinsics)
    back = camera_to_lidar(cloud, extrinsics)

    assert np.allclose(back.xyz, hemisphere.xyz[in_front], rtol=0, atol=1e-12)
    assert np.all(back.reflectance == 0)


def test_check_extrinsics():
    square = np.eye(4)
    square[:3, :3] = AXIS_PERMUTATION[:, :3]
    assert check_extrinsics(square).shape == (3, 4)

    with pytest.raises(ValueError):
        check_extrinsics(np.column_stack([2 * np.eye(3), np.zeros(3)]))
    with pytest.raises(ShapeMismatchError):
        check_extrinsics(np.zeros((2, 4)))


def test_pseudo_lidar_scan(desk_calib):
    values = np.zeros((96, 320))
    values[48, 160] = 10.0
    scan = pseudo_lidar_scan(DepthMap.from_array(values), desk_calib)
    assert np.allclose(scan.xyz, [[10.0, 0.0, 0.0]])

    cloud = PointCloud(xyz=[[1.0, 2.0, 3.0]])
    assert np.allclose(lidar_to_camera(camera_to_lidar(cloud)).xyz, cloud.xyz)
