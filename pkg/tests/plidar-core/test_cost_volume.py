import numpy as np
import pytest
from pydantic import ValidationError

from plidar.core.cost_volume import (
    CostVolume,
    build_disparity_volume,
    default_depth_grid,
    estimate_depth,
    remap_to_depth_volume,
    soft_argmax,
    to_grayscale,
)
from plidar.core.errors import GridKindError, ShapeMismatchError
from plidar.core.geometry import CameraCalib, DepthMap, DisparityMap
from plidar.core.utils import GridKind

WIDTH, HEIGHT = 80, 40


@pytest.fixture
def texture(rng):
    return np.round(rng.uniform(0, 255, (HEIGHT, WIDTH + 32)))


@pytest.fixture
def unit_calib():
    """f_u * b = 100, so depths 2, 4, 5, 20, 25 m sit on integer disparities"""
    return CameraCalib(f_u=100.0, f_v=100.0, c_u=40.0, c_v=20.0, baseline_m=1.0)


def interior(window: int, shift: int):
    half = window // 2
    return np.s_[half:-half, shift + half : -half]


def test_identical_images(texture):
    image = texture[:, :WIDTH]
    vol = build_disparity_volume(image, image, max_disparity=16, window=5)

    assert vol.kind is GridKind.disparity
    assert vol.scores.dtype == np.float32
    assert vol.scores.shape == (HEIGHT, WIDTH, 17)
    assert vol.grid.tolist() == list(range(17))
    assert np.all(vol.argmax()[2:-2, 2:-2] == 0)


def test_shifted_images(texture):
    left, right = texture[:, :WIDTH], texture[:, 7 : WIDTH + 7]
    vol = build_disparity_volume(left, right, max_disparity=16, window=5)
    recovered = vol.argmax()[interior(5, 7)]
    assert np.mean(recovered == 7) >= 0.99


def test_shift_direction(texture):
    left, right = texture[:, 7 : WIDTH + 7], texture[:, :WIDTH]
    vol = build_disparity_volume(left, right, max_disparity=16, window=5, right_shift=1)
    half = 2
    recovered = vol.argmax()[half:-half, half : -half - 7]
    assert np.mean(recovered == 7) >= 0.99


def test_constant_images():
    image = np.full((HEIGHT, WIDTH), 90.0)
    vol = build_disparity_volume(image, image, max_disparity=9, window=3)
    assert np.all(vol.scores == 0)

    d_map = soft_argmax(vol)
    assert np.allclose(d_map.values, 4.5)


def test_image_size_mismatch(texture):
    with pytest.raises(ShapeMismatchError):
        build_disparity_volume(texture[:, :WIDTH], texture[:, : WIDTH - 1])


def test_grayscale():
    rgb = np.zeros((2, 2, 3))
    rgb[..., 0] = 100
    rgb[..., 2] = 200
    assert np.allclose(to_grayscale(rgb), 0.299 * 100 + 0.114 * 200)
    with pytest.raises(ShapeMismatchError):
        to_grayscale(np.zeros(4))


def test_volume_validation():
    with pytest.raises(ValidationError):
        CostVolume(scores=np.zeros((2, 2, 3)), grid=[0, 2, 1], kind=GridKind.disparity)
    with pytest.raises(ValidationError):
        CostVolume(scores=np.zeros((2, 2, 3)), grid=[0, 1], kind=GridKind.disparity)


def test_default_depth_grid():
    grid = default_depth_grid()
    assert len(grid) == 80
    assert grid[0] == 1.0
    assert grid[-1] == 80.0


def test_remap_knots(rng, unit_calib):
    scores = rng.normal(size=(4, 5, 192)).astype(np.float32)
    disp_vol = CostVolume(scores=scores, grid=np.arange(192), kind=GridKind.disparity)
    depth_vol = remap_to_depth_volume(disp_vol, unit_calib)

    assert depth_vol.kind is GridKind.depth
    assert depth_vol.levels == 80
    for z, d in [(1, 100), (2, 50), (4, 25), (5, 20), (10, 10), (20, 5), (25, 4), (50, 2)]:
        assert np.array_equal(depth_vol.scores[..., z - 1], scores[..., d])


def test_remap_between_knots(rng, unit_calib):
    scores = rng.normal(size=(4, 5, 192)).astype(np.float32)
    disp_vol = CostVolume(scores=scores, grid=np.arange(192), kind=GridKind.disparity)
    depth_vol = remap_to_depth_volume(disp_vol, unit_calib, depth_grid=[3.0])

    # 100 / 3 lies between disparities 33 and 34
    lo, hi = scores[..., 33], scores[..., 34]
    out = depth_vol.scores[..., 0]
    assert np.all(out >= np.minimum(lo, hi) - 1e-6)
    assert np.all(out <= np.maximum(lo, hi) + 1e-6)


def test_remap_clamps(rng, unit_calib):
    scores = rng.normal(size=(3, 3, 11)).astype(np.float32)
    disp_vol = CostVolume(scores=scores, grid=np.arange(11), kind=GridKind.disparity)
    depth_vol = remap_to_depth_volume(disp_vol, unit_calib, depth_grid=[1.0, 2.0])
    assert np.array_equal(depth_vol.scores[..., 0], scores[..., 10])
    assert np.array_equal(depth_vol.scores[..., 1], scores[..., 10])


def test_remap_one_hot(unit_calib):
    scores = np.zeros((2, 3, 192), dtype=np.float32)
    scores[..., 5] = 1000.0
    disp_vol = CostVolume(scores=scores, grid=np.arange(192), kind=GridKind.disparity)
    z_map = soft_argmax(remap_to_depth_volume(disp_vol, unit_calib))
    assert isinstance(z_map, DepthMap)
    assert np.allclose(z_map.values, 20.0, atol=1e-6)


def test_remap_constant(unit_calib):
    disp_vol = CostVolume(
        scores=np.full((2, 2, 20), 3.5), grid=np.arange(20), kind=GridKind.disparity
    )
    assert np.all(remap_to_depth_volume(disp_vol, unit_calib).scores == 3.5)


def test_remap_rejects_depth_volume(unit_calib):
    depth_vol = CostVolume(scores=np.zeros((1, 1, 2)), grid=[1, 2], kind=GridKind.depth)
    with pytest.raises(GridKindError):
        remap_to_depth_volume(depth_vol, unit_calib)


def test_soft_argmax_one_hot():
    grid = np.arange(1.0, 81.0)
    scores = np.zeros((2, 2, 80))
    scores[..., 36] = 1000.0
    z_map = soft_argmax(CostVolume(scores=scores, grid=grid, kind=GridKind.depth))
    assert np.allclose(z_map.values, 37.0, atol=1e-6)


def test_soft_argmax_uniform():
    vol = CostVolume(scores=np.zeros((3, 3, 80)), grid=np.arange(1.0, 81.0), kind=GridKind.depth)
    assert np.allclose(soft_argmax(vol).values, 40.5)


def test_soft_argmax_two_peaks():
    grid = np.arange(1.0, 81.0)
    scores = np.full((1, 1, 80), -np.inf)
    scores[..., 9] = 0.0
    scores[..., 19] = 0.0
    vol = CostVolume(scores=scores, grid=grid, kind=GridKind.depth)
    assert soft_argmax(vol).values[0, 0] == pytest.approx(15.0, abs=1e-12)


def test_soft_argmax_properties(rng):
    grid = np.unique(rng.uniform(1.0, 80.0, 30))
    scores = np.round(rng.normal(scale=5.0, size=(6, 7, len(grid))))
    vol = CostVolume(scores=scores, grid=grid, kind=GridKind.depth)
    out = soft_argmax(vol).values

    assert np.all(out >= grid[0] - 1e-9) and np.all(out <= grid[-1] + 1e-9)

    shifted = CostVolume(scores=scores + 100.0, grid=grid, kind=GridKind.depth)
    assert np.allclose(soft_argmax(shifted).values, out, rtol=1e-12, atol=0)

    disp_vol = CostVolume(scores=scores, grid=grid, kind=GridKind.disparity)
    assert isinstance(soft_argmax(disp_vol), DisparityMap)


def test_soft_argmax_needs_levels():
    with pytest.raises(ValueError):
        soft_argmax(CostVolume(scores=np.zeros((1, 1, 1)), grid=[1.0], kind=GridKind.depth))


@pytest.mark.parametrize("method", ["depth", "disparity"])
def test_estimate_depth(texture, unit_calib, method):
    # disparity 5 is 20 m for this camera
    left, right = texture[:, :WIDTH], texture[:, 5 : WIDTH + 5]
    z_map = estimate_depth(left, right, unit_calib, method=method, max_disparity=16, window=5)
    assert np.allclose(z_map.values[interior(5, 5)], 20.0, atol=1e-6)
