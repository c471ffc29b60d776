import configparser
import logging
import os
import pathlib
import typing as t
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from hqsl.exceptions import ConfigError
from hqsl.models import ModelParams, ScanVariable, SweepSpec, TimeGrid, Topology

# Load environment variables from .env file
load_dotenv()

ENV_PREFIX = "HQSL_"
CONFIG_SECTIONS = ("model", "grid", "sweep")


class ISettingsLoader(ABC):
    @abstractmethod
    def load(self, key: str, default=None):
        pass


class EnvSettingsLoader(ISettingsLoader):
    def load(self, key: str, default=None):
        return os.environ.get(f"{ENV_PREFIX}{key.upper()}", default)


class IniSettingsLoader(ISettingsLoader):
    """Plain-text key=value file with [model], [grid] and [sweep] sections; keys are "section.key"."""

    def __init__(self, path: pathlib.Path) -> None:
        self.path = path
        self.parser = configparser.ConfigParser()
        try:
            with open(path) as f:
                self.parser.read_file(f)
        except (OSError, configparser.Error) as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e

        unknown = set(self.parser.sections()) - set(CONFIG_SECTIONS)
        if unknown:
            raise ConfigError(f"Unknown config sections {sorted(unknown)} in {path}")

    def load(self, key: str, default=None):
        section, _, name = key.partition(".")
        return self.parser.get(section, name, fallback=default)

    def items(self) -> dict[str, str]:
        """Every key of every section, flattened (keys are unique across sections)."""
        values: dict[str, str] = {}
        for section in self.parser.sections():
            values.update(self.parser.items(section))
        return values


@dataclass
class Settings:
    settings_loader: ISettingsLoader

    dt: float = field(init=False)
    workers: int = field(init=False)
    onset_threshold: float = field(init=False)
    results_path: pathlib.Path = field(init=False)
    log_level: str = field(init=False)

    def __post_init__(self):
        self.dt = float(self.settings_loader.load("dt", 1e-3))
        if self.dt <= 0:
            raise ValueError("HQSL_DT must be positive")

        self.workers = int(self.settings_loader.load("workers", 1))
        if self.workers < 1:
            raise ValueError("HQSL_WORKERS must be at least 1")

        self.onset_threshold = float(self.settings_loader.load("onset_threshold", 1e-6))

        self.results_path = pathlib.Path(
            self.settings_loader.load("results_path", "results")
        )

        self.log_level = str(self.settings_loader.load("log_level", "INFO")).upper()
        if self.log_level not in logging.getLevelNamesMapping():
            raise ValueError(f"Unknown log level {self.log_level}")


@lru_cache
def load_settings():
    settings_loader = EnvSettingsLoader()
    return Settings(settings_loader=settings_loader)


class RunConfig(BaseModel):
    """Everything one command needs; rates are multiples of omega0."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # [model]
    omega0: float = Field(1.0, ge=0)
    gamma0: float = Field(0.0, ge=0)
    kappa: float = Field(0.0, ge=0)
    omega: float = Field(0.0, ge=0)
    gamma: float = Field(0.0, ge=0)
    n_cavities: int = Field(0, ge=0)
    topology: Topology = Topology.REDUCED_SYMMETRIC

    # [grid]
    tau: float = Field(3.0, gt=0)
    dt: float = Field(1e-3, gt=0)

    # [sweep]
    omega_start: float = Field(0.0, ge=0)
    omega_stop: float = Field(5.0, ge=0)
    omega_step: float = Field(0.05, gt=0)
    n_min: int = Field(2, ge=0)
    n_max: int = Field(8, ge=0)
    workers: int = Field(1, ge=1)
    scan: ScanVariable = ScanVariable.OMEGA
    bracket_lo: float = Field(0.0, ge=0)
    bracket_hi: float = Field(5.0, ge=0)
    onset_threshold: float = Field(1e-6, gt=0)

    @model_validator(mode="after")
    def check_consistency(self) -> "RunConfig":
        if self.omega_stop < self.omega_start:
            raise ValueError(
                f"Empty omega range: omega_stop={self.omega_stop} < omega_start={self.omega_start}"
            )
        if self.n_max < self.n_min:
            raise ValueError(f"Empty N range: n_max={self.n_max} < n_min={self.n_min}")
        if self.bracket_hi <= self.bracket_lo:
            raise ValueError("bracket_hi must be larger than bracket_lo")
        if self.dt > self.tau:
            raise ValueError(f"dt={self.dt} exceeds tau={self.tau}")
        return self

    def model_params(self) -> ModelParams:
        return ModelParams(
            omega0=self.omega0,
            gamma0=self.gamma0,
            kappa=self.kappa,
            omega=self.omega,
            gamma=self.gamma,
            n_cavities=self.n_cavities,
            topology=self.topology,
        )

    def time_grid(self) -> TimeGrid:
        return TimeGrid(t_end=self.tau, dt=self.dt)

    def sweep_spec(self) -> SweepSpec:
        return SweepSpec(
            omega_range=(self.omega_start, self.omega_stop, self.omega_step),
            n_range=(self.n_min, self.n_max),
            fixed=self.model_params(),
            tau=self.tau,
            dt=self.dt,
            workers=self.workers,
            onset_threshold=self.onset_threshold,
        )

    @classmethod
    def from_sources(
        cls,
        settings: Settings,
        config_path: pathlib.Path | None = None,
        overrides: t.Mapping[str, t.Any] | None = None,
    ) -> "RunConfig":
        """Merge settings < config file < command-line overrides, then validate."""
        values: dict[str, t.Any] = {
            "dt": settings.dt,
            "workers": settings.workers,
            "onset_threshold": settings.onset_threshold,
        }
        if config_path is not None:
            values.update(IniSettingsLoader(config_path).items())
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})

        try:
            config = cls.model_validate(values)
            # invariants of the derived domain values
            config.model_params()
            config.time_grid()
        except ValidationError as e:
            raise ConfigError(str(e)) from e
        return config
