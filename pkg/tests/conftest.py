import numpy as np
import pytest

from plidar.core.geometry import CameraCalib


@pytest.fixture(scope="session")
def kitti_calib():
    """Left color camera of a KITTI object frame"""
    return CameraCalib(f_u=721.0, f_v=721.0, c_u=609.56, c_v=172.85, baseline_m=0.54)


@pytest.fixture(scope="session")
def desk_calib():
    """Camera of the 320x96 synthetic scenes"""
    return CameraCalib(f_u=180.0, f_v=180.0, c_u=160.0, c_v=48.0, baseline_m=0.54)


@pytest.fixture
def rng():
    return np.random.default_rng(20201018)
