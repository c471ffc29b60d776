import enum
import math
import typing as t
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from hqsl import __version__

# Largest grid accepted by TimeGrid.
MAX_GRID_POINTS = 10_000_000

QUBIT_ATOL = 1e-12

# N(Phi) above this marks non-Markovian dynamics.
ONSET_THRESHOLD = 1e-6
# tau_QSL/tau below 1 - SPEEDUP_ATOL marks a speedup.
SPEEDUP_ATOL = 1e-9


class Topology(enum.StrEnum):
    REDUCED_SYMMETRIC = "reduced"
    RING_EXPLICIT = "ring"


class Regime(enum.StrEnum):
    WEAK = "weak"
    STRONG = "strong"
    CRITICAL = "critical"


class Basis(enum.StrEnum):
    # (g, c0, sum of c_n)
    REDUCED = "reduced"
    # (g, c0, c_1, ..., c_N)
    LATTICE = "lattice"


class ModelParams(BaseModel):
    """Rates and couplings of the qubit + hierarchical environment, in units of omega0."""

    model_config = ConfigDict(frozen=True)

    omega0: float = Field(1.0, ge=0)  # qubit-m0 coupling
    gamma0: float = Field(0.0, ge=0)  # m0 loss rate
    kappa: float = Field(0.0, ge=0)  # m0-m_n coupling
    omega: float = Field(0.0, ge=0)  # nearest-neighbour coupling in the second layer
    gamma: float = Field(0.0, ge=0)  # second-layer loss rate
    n_cavities: int = Field(0, ge=0)
    topology: Topology = Topology.REDUCED_SYMMETRIC

    @model_validator(mode="after")
    def check_single_cavity_ring(self) -> "ModelParams":
        if self.n_cavities == 1 and self.omega > 0:
            raise ValueError(
                "A single second-layer cavity has no neighbours: omega must be 0 when n_cavities=1"
            )
        return self

    @property
    def is_baseline(self) -> bool:
        """True when the second layer is absent (damped Jaynes-Cummings model)."""
        return self.n_cavities == 0 or self.kappa == 0

    @property
    def regime(self) -> Regime:
        if self.gamma0 > 4 * self.omega0:
            return Regime.WEAK
        if self.gamma0 < 4 * self.omega0:
            return Regime.STRONG
        return Regime.CRITICAL

    def replace(self, **changes: t.Any) -> "ModelParams":
        """Validated copy with some fields changed."""
        return ModelParams.model_validate(self.model_dump() | changes)


@dataclass(frozen=True)
class Generator:
    """M in i dpsi/dt = M psi, restricted to the single-excitation sector."""

    entries: np.ndarray
    basis: Basis = Basis.REDUCED
    # Diagonal map from the basis to orthonormal mode amplitudes; None if it is one already.
    # A zero marks a component that can never be excited.
    scale: np.ndarray | None = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"Generator must be a square matrix, got {entries.shape}")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

        if self.scale is not None:
            scale = np.array(self.scale, dtype=float)
            if scale.shape != (entries.shape[0],) or np.any(scale < 0):
                raise ValueError(f"Scale must be {entries.shape[0]} non-negative numbers")
            scale.flags.writeable = False
            object.__setattr__(self, "scale", scale)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def mode_amplitudes(self, psi: np.ndarray) -> np.ndarray:
        """Amplitudes of orthonormal modes; their squared sum is the excitation probability."""
        if self.scale is None:
            return psi
        return psi * self.scale

    def mode_entries(self) -> np.ndarray:
        """M written on the orthonormal modes that can be excited."""
        if self.scale is None:
            return self.entries
        active = self.scale > 0
        s = self.scale[active]
        return self.entries[np.ix_(active, active)] * s[:, np.newaxis] / s[np.newaxis, :]

    def dissipation_spectrum(self) -> np.ndarray:
        """Eigenvalues of the anti-Hermitian part of M on orthonormal modes; all <= 0 when lossy."""
        m = self.mode_entries()
        return np.linalg.eigvalsh((m - m.conj().T) / 2j)

    def initial_state(self) -> np.ndarray:
        """|1, 0...0>: qubit excited, every cavity empty."""
        psi0 = np.zeros(self.dimension, dtype=complex)
        psi0[0] = 1.0
        return psi0


@dataclass(frozen=True)
class QubitState:
    """2x2 density matrix in the basis {|1>, |0>}."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (2, 2):
            raise ValueError(f"Qubit state must be 2x2, got {matrix.shape}")
        if not np.allclose(matrix, matrix.conj().T, atol=QUBIT_ATOL, rtol=0):
            raise ValueError("Qubit state must be Hermitian")
        if abs(np.trace(matrix) - 1) > QUBIT_ATOL:
            raise ValueError(f"Qubit state must have unit trace, got {np.trace(matrix)}")
        if np.linalg.eigvalsh(matrix).min() < -QUBIT_ATOL:
            raise ValueError("Qubit state must be positive semidefinite")
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def excited(cls) -> "QubitState":
        return cls(np.array([[1, 0], [0, 0]]))

    @classmethod
    def ground(cls) -> "QubitState":
        return cls(np.array([[0, 0], [0, 1]]))

    @classmethod
    def from_ket(cls, ket: t.Sequence[complex]) -> "QubitState":
        """Pure state from amplitudes (a1, a0) on (|1>, |0>)."""
        vector = np.asarray(ket, dtype=complex)
        vector = vector / np.linalg.norm(vector)
        return cls(np.outer(vector, vector.conj()))

    @property
    def excited_population(self) -> float:
        return float(self.matrix[0, 0].real)


class TimeGrid(BaseModel):
    """Uniform output grid t_k = k * dt, k = 0..steps, in units of 1/omega0."""

    model_config = ConfigDict(frozen=True)

    t_end: float = Field(gt=0)
    dt: float = Field(1e-3, gt=0)

    @model_validator(mode="after")
    def check_size(self) -> "TimeGrid":
        if self.t_end / self.dt > MAX_GRID_POINTS:
            raise ValueError(
                f"Grid of {self.t_end / self.dt:.3g} steps exceeds {MAX_GRID_POINTS}"
            )
        return self

    @property
    def steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def index_of(self, tau: float) -> int:
        """Grid index k with k * dt == tau."""
        k = int(round(tau / self.dt))
        if abs(k * self.dt - tau) > 1e-6 * self.dt:
            raise ValueError(f"tau={tau} is not a point of the grid with dt={self.dt}")
        if k < 0 or k > self.steps:
            raise ValueError(f"tau={tau} lies outside [0, {self.steps * self.dt}]")
        return k


@dataclass(frozen=True)
class AmplitudeTrajectory:
    grid: TimeGrid
    g: np.ndarray
    c0: np.ndarray
    csum: np.ndarray
    dg: np.ndarray  # exact dg/dt from the generator
    norm: np.ndarray  # sqrt of the total excitation probability

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def truncate(self, tau: float) -> "AmplitudeTrajectory":
        """The trajectory restricted to [0, tau]."""
        k = self.grid.index_of(tau)
        return AmplitudeTrajectory(
            grid=TimeGrid(t_end=k * self.grid.dt, dt=self.grid.dt),
            g=self.g[: k + 1],
            c0=self.c0[: k + 1],
            csum=self.csum[: k + 1],
            dg=self.dg[: k + 1],
            norm=self.norm[: k + 1],
        )


class MeasureReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: float
    nonmarkovianity: float = Field(ge=0)
    qsl_ratio_direct: float
    qsl_ratio_relation: float
    survival_at_tau: float
    consistency_residual: float
    # P(tau) = 1 with no motion at all; both ratios are then set to 1
    degenerate: bool = False


class ScanVariable(enum.StrEnum):
    KAPPA = "kappa"
    OMEGA = "omega"
    N = "n"


class PointStatus(enum.StrEnum):
    OK = "ok"
    FAILED = "failed"


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    omega_range: tuple[float, float, float]  # (start, stop, step)
    n_range: tuple[int, int]  # (min, max), inclusive
    fixed: ModelParams
    tau: float = Field(gt=0)
    dt: float = Field(1e-3, gt=0)
    workers: int = Field(1, ge=1)
    onset_threshold: float = Field(ONSET_THRESHOLD, gt=0)

    @model_validator(mode="after")
    def check_ranges(self) -> "SweepSpec":
        start, stop, step = self.omega_range
        if step <= 0:
            raise ValueError("omega step must be positive")
        if start < 0 or stop < start:
            raise ValueError(f"empty omega range [{start}, {stop}]")
        n_min, n_max = self.n_range
        if n_min < 0 or n_max < n_min:
            raise ValueError(f"empty N range [{n_min}, {n_max}]")
        return self

    def omega_values(self) -> list[float]:
        start, stop, step = self.omega_range
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]

    def n_values(self) -> list[int]:
        return list(range(self.n_range[0], self.n_range[1] + 1))


class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    kappa: float | None = None
    omega: float
    n: int
    nonmarkovianity: float
    qsl_ratio: float
    qsl_ratio_direct: float
    survival_at_tau: float
    # decided by the onset threshold of the sweep
    non_markovian: bool = False
    speedup: bool = False
    status: PointStatus = PointStatus.OK


class SweepMetadata(BaseModel):
    spec: SweepSpec
    version: str = __version__


class SweepResult(BaseModel):
    rows: list[SweepRow]
    metadata: SweepMetadata


class Crossover(BaseModel):
    """Critical value of a one-parameter search, with every coarse crossing found."""

    model_config = ConfigDict(frozen=True)

    # the first crossing of the bracket, None when there is none
    value: float | None
    # coarse (lo, hi) brackets of every crossing, in scan order
    brackets: list[tuple[float, float]] = []

    @property
    def reentrant(self) -> bool:
        return len(self.brackets) > 1
