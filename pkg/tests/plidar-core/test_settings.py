import json
from pathlib import PosixPath

import pytest
from pydantic import ValidationError

from plidar.core.settings import PlidarSettings


def test_default_config_path(tmp_path: PosixPath, monkeypatch):
    """Make sure the config file replaces the built in defaults"""

    with open(tmp_path / "temp_config.json", "w") as f:
        json.dump({"KNN_K": 7, "ERROR_BIN_EDGES": [0, 10, 20]}, f)

    monkeypatch.setenv("PLIDAR_CONFIG_FILE", str(tmp_path.resolve() / "temp_config.json"))
    test_config = PlidarSettings()

    assert test_config.KNN_K == 7
    assert test_config.ERROR_BIN_EDGES == [0.0, 10.0, 20.0]
    assert test_config.GDC_TOL == 1e-8


def test_allow_extra_fields(tmp_path: PosixPath, monkeypatch):
    """Makes sure plidar config can be subclassed without loading issues"""

    with open(tmp_path / "temp_config.json", "w") as f:
        json.dump({"sub_class_prop": True}, f)

    monkeypatch.setenv("PLIDAR_CONFIG_FILE", str(tmp_path.resolve() / "temp_config.json"))

    PlidarSettings()


def test_environment_overrides(tmp_path: PosixPath, monkeypatch):
    with open(tmp_path / "temp_config.json", "w") as f:
        json.dump({"KNN_K": 7}, f)

    monkeypatch.setenv("PLIDAR_CONFIG_FILE", str(tmp_path.resolve() / "temp_config.json"))
    monkeypatch.setenv("PLIDAR_KNN_K", "12")

    assert PlidarSettings().KNN_K == 12


def test_missing_config_file(tmp_path: PosixPath, monkeypatch):
    monkeypatch.setenv("PLIDAR_CONFIG_FILE", str(tmp_path / "absent.json"))
    settings = PlidarSettings()
    assert settings.MAX_DEPTH == 80.0
    assert settings.STEREO_RIGHT_SHIFT == -1


@pytest.mark.parametrize(
    "overrides",
    [
        {"SAD_WINDOW": 4},
        {"STEREO_RIGHT_SHIFT": 2},
        {"MIN_DEPTH": 10.0, "MAX_DEPTH": 5.0},
    ],
)
def test_invalid_settings(overrides):
    with pytest.raises(ValidationError):
        PlidarSettings(**overrides)
