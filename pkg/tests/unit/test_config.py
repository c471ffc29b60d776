import pathlib

import pytest

from hqsl.config import (
    EnvSettingsLoader,
    IniSettingsLoader,
    RunConfig,
    Settings,
    load_settings,
)
from hqsl.exceptions import ConfigError
from hqsl.models import ScanVariable, Topology


def test_load_settings_defaults(mocker):
    mocker.patch(
        "hqsl.config.EnvSettingsLoader.load", side_effect=lambda key, default=None: default
    )

    settings = load_settings()
    assert issubclass(type(settings), Settings)

    assert settings.dt == 1e-3
    assert settings.workers == 1
    assert settings.onset_threshold == 1e-6
    assert settings.results_path == pathlib.Path("results")
    assert settings.log_level == "INFO"


def test_load_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("HQSL_DT", "0.01")
    monkeypatch.setenv("HQSL_WORKERS", "3")
    monkeypatch.setenv("HQSL_RESULTS_PATH", str(tmp_path))
    monkeypatch.setenv("HQSL_LOG_LEVEL", "debug")

    settings = load_settings()

    assert settings.dt == 0.01
    assert settings.workers == 3
    assert settings.results_path == tmp_path
    assert settings.log_level == "DEBUG"
    assert load_settings() is settings


@pytest.mark.parametrize(
    "key, value",
    [("dt", "0"), ("workers", "0"), ("log_level", "chatty")],
)
def test_settings_validation(mocker, key, value):
    values = {key: value}
    mocker.patch(
        "hqsl.config.EnvSettingsLoader.load",
        side_effect=lambda k, default=None: values.get(k, default),
    )

    with pytest.raises(ValueError):
        Settings(settings_loader=EnvSettingsLoader())


def test_ini_settings_loader(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[model]\ngamma0 = 5\nn_cavities = 4\n\n[grid]\ntau = 2.5\n")

    loader = IniSettingsLoader(path)

    assert loader.load("model.gamma0") == "5"
    assert loader.load("grid.dt", "0.001") == "0.001"
    assert loader.items() == {"gamma0": "5", "n_cavities": "4", "tau": "2.5"}


def test_ini_settings_loader_errors(tmp_path):
    with pytest.raises(ConfigError, match="Cannot read"):
        IniSettingsLoader(tmp_path / "missing.ini")

    path = tmp_path / "run.ini"
    path.write_text("[plot]\ncolour = red\n")
    with pytest.raises(ConfigError, match="Unknown config sections"):
        IniSettingsLoader(path)


def test_run_config_merges_sources(mocker, tmp_path):
    mocker.patch(
        "hqsl.config.EnvSettingsLoader.load",
        side_effect=lambda key, default=None: {"dt": "0.01", "workers": "2"}.get(key, default),
    )
    path = tmp_path / "run.ini"
    path.write_text(
        "[model]\ngamma0 = 5\nkappa = 5\nn_cavities = 4\ntopology = ring\n"
        "[sweep]\nscan = n\nworkers = 3\n"
    )

    config = RunConfig.from_sources(load_settings(), path, {"kappa": 2.0, "omega": None})

    assert config.dt == 0.01
    assert config.workers == 3
    assert config.gamma0 == 5.0
    assert config.kappa == 2.0
    assert config.omega == 0.0
    assert config.topology == Topology.RING_EXPLICIT
    assert config.scan == ScanVariable.N

    params = config.model_params()
    assert params.n_cavities == 4
    assert config.time_grid().steps == 300
    spec = config.sweep_spec()
    assert spec.omega_range == (0.0, 5.0, 0.05)
    assert spec.n_range == (2, 8)
    assert spec.workers == 3


@pytest.mark.parametrize(
    "overrides",
    [
        {"gamma0": -1.0},
        {"tau": 0.0},
        {"dt": 5.0},
        {"omega_start": 2.0, "omega_stop": 1.0},
        {"n_min": 5, "n_max": 3},
        {"bracket_lo": 3.0, "bracket_hi": 1.0},
        {"n_cavities": 1, "omega": 1.0},
        {"unknown": 1},
    ],
)
def test_run_config_rejects_invalid(overrides):
    with pytest.raises(ConfigError):
        RunConfig.from_sources(load_settings(), None, overrides)
