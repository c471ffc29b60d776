import cmath
import enum
import logging
from abc import ABC, abstractmethod

import numpy as np
from scipy.integrate import solve_ivp

from hqsl.exceptions import (
    DefectiveGeneratorError,
    NonConvergenceError,
    NormGrowthError,
)
from hqsl.generators import build_generator, reduced_generator
from hqsl.models import (
    AmplitudeTrajectory,
    Basis,
    Generator,
    ModelParams,
    TimeGrid,
    Topology,
)

NORM_GROWTH_ATOL = 1e-6
UNIT_NORM_ATOL = 1e-12
# Roots closer than this make the partial-fraction residues meaningless.
DEGENERATE_ROOT_GAP = 1e-9


class PropagationMethod(enum.StrEnum):
    AUTO = "auto"
    EIGEN = "eigen"
    RUNGE_KUTTA = "runge-kutta"


class IPropagator(ABC):
    @abstractmethod
    def propagate(
        self, generator: Generator, times: np.ndarray, initial: np.ndarray
    ) -> np.ndarray:
        """Amplitude vectors exp(-i M t) psi0 for every t, shape (len(times), dimension)."""
        ...


class EigenPropagator(IPropagator):
    max_condition: float = 1e8

    def propagate(
        self, generator: Generator, times: np.ndarray, initial: np.ndarray
    ) -> np.ndarray:
        eigenvalues, vectors = np.linalg.eig(generator.entries)
        condition = np.linalg.cond(vectors)
        if not np.isfinite(condition) or condition >= self.max_condition:
            raise DefectiveGeneratorError(
                f"Eigenvector condition number {condition:.3g} >= {self.max_condition:.0e}"
            )

        coefficients = np.linalg.solve(vectors, initial)
        phases = np.exp(-1j * np.outer(times, eigenvalues))
        return (phases * coefficients) @ vectors.T


class RungeKuttaPropagator(IPropagator):
    """Embedded 8(5,3) Dormand-Prince pair with step-size control."""

    method: str = "DOP853"
    rtol: float = 1e-12
    atol: float = 1e-14

    def propagate(
        self, generator: Generator, times: np.ndarray, initial: np.ndarray
    ) -> np.ndarray:
        if len(times) == 1:
            return initial[np.newaxis, :].copy()

        m = generator.entries
        solution = solve_ivp(
            lambda _, psi: -1j * (m @ psi),
            (times[0], times[-1]),
            initial,
            method=self.method,
            t_eval=times,
            rtol=self.rtol,
            atol=self.atol,
        )
        if not solution.success:
            raise NonConvergenceError(f"{self.method} failed: {solution.message}")
        return solution.y.T


def propagate(
    generator: Generator,
    grid: TimeGrid,
    initial: np.ndarray | None = None,
    method: PropagationMethod = PropagationMethod.AUTO,
) -> AmplitudeTrajectory:
    """Exact linear propagation of i dpsi/dt = M psi on the grid."""
    if initial is None:
        initial = generator.initial_state()
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (generator.dimension,):
        raise ValueError(
            f"Initial vector of shape {initial.shape} does not match a "
            f"{generator.dimension}-dimensional generator"
        )
    if abs(np.linalg.norm(generator.mode_amplitudes(initial)) - 1) > UNIT_NORM_ATOL:
        raise ValueError("Initial vector must have unit norm")

    times = grid.times
    if method == PropagationMethod.RUNGE_KUTTA:
        psi = RungeKuttaPropagator().propagate(generator, times, initial)
    else:
        try:
            psi = EigenPropagator().propagate(generator, times, initial)
        except DefectiveGeneratorError as e:
            if method == PropagationMethod.EIGEN:
                raise
            logging.info(f"{e}; falling back to {RungeKuttaPropagator.method}")
            psi = RungeKuttaPropagator().propagate(generator, times, initial)
    # t_0 = 0 is the initial state, not its reconstruction from the eigenbasis
    psi[0] = initial

    norm = np.linalg.norm(generator.mode_amplitudes(psi), axis=1)
    largest = norm.max()
    if largest > 1 + NORM_GROWTH_ATOL:
        raise NormGrowthError(f"State norm reached {largest:.9g} > 1")

    dpsi = -1j * psi @ generator.entries.T
    if generator.dimension < 3:
        csum = np.zeros(len(times), dtype=complex)
    elif generator.basis == Basis.REDUCED:
        csum = psi[:, 2]
    else:
        csum = psi[:, 2:].sum(axis=1)

    return AmplitudeTrajectory(
        grid=grid,
        g=psi[:, 0],
        c0=psi[:, 1] if generator.dimension > 1 else np.zeros(len(times), dtype=complex),
        csum=csum,
        dg=dpsi[:, 0],
        norm=norm,
    )


def simulate(
    params: ModelParams,
    grid: TimeGrid,
    method: PropagationMethod = PropagationMethod.AUTO,
) -> AmplitudeTrajectory:
    """g(t) for the qubit starting excited with every cavity empty."""
    return propagate(build_generator(params), grid, method=method)


def solve_cubic(a2: complex, a1: complex, a0: complex) -> np.ndarray:
    """Roots of z^3 + a2 z^2 + a1 z + a0 by Cardano's formula, Newton-polished."""
    shift = a2 / 3
    p = a1 - a2 * a2 / 3
    q = 2 * a2**3 / 27 - a2 * a1 / 3 + a0

    disc = cmath.sqrt((q / 2) ** 2 + (p / 3) ** 3)
    w = -q / 2 + disc
    if abs(-q / 2 - disc) > abs(w):
        w = -q / 2 - disc

    if w == 0:
        depressed = [0j, 0j, 0j]
    else:
        u = w ** (1 / 3)
        v = -p / (3 * u)
        rotation = cmath.exp(2j * cmath.pi / 3)
        depressed = [
            rotation**k * u + rotation ** (-k) * v for k in range(3)
        ]

    roots = []
    for y in depressed:
        z = y - shift
        for _ in range(2):
            slope = 3 * z * z + 2 * a2 * z + a1
            if slope == 0:
                break
            z -= (((z + a2) * z + a1) * z + a0) / slope
        roots.append(z)
    return np.array(roots, dtype=complex)


def characteristic_coefficients(params: ModelParams) -> tuple[complex, complex, complex]:
    """(a2, a1, a0) of det(z - M) = z^3 + a2 z^2 + a1 z + a0 for the reduced generator."""
    m = reduced_generator(params).entries
    m11, m22 = m[1, 1], m[2, 2]
    coupling = m[1, 2] * m[2, 1]
    omega0_sq = params.omega0**2
    return (
        complex(-(m11 + m22)),
        complex(m11 * m22 - coupling - omega0_sq),
        complex(omega0_sq * m22),
    )


def characteristic_roots(params: ModelParams) -> np.ndarray:
    return solve_cubic(*characteristic_coefficients(params))


def residues(params: ModelParams, roots: np.ndarray) -> np.ndarray:
    """Partial-fraction residues of the Laplace image of g at each root."""
    m = reduced_generator(params).entries
    m11, m22 = m[1, 1], m[2, 2]
    coupling = m[1, 2] * m[2, 1]

    numerators = (roots - m11) * (roots - m22) - coupling
    denominators = np.array(
        [np.prod([roots[j] - roots[k] for k in range(3) if k != j]) for j in range(3)]
    )
    return numerators / denominators


def min_root_gap(roots: np.ndarray) -> float:
    return min(abs(roots[j] - roots[k]) for j in range(3) for k in range(j + 1, 3))


def g_closed_form(params: ModelParams, t: float | np.ndarray) -> complex | np.ndarray:
    """g(t) = sum_j R_j exp(-i lambda_j t) over the roots of the characteristic cubic."""
    params = params.replace(topology=Topology.REDUCED_SYMMETRIC)
    roots = characteristic_roots(params)
    gap = min_root_gap(roots)
    if gap < DEGENERATE_ROOT_GAP:
        logging.info(f"Characteristic roots {gap:.3g} apart; using propagation instead")
        return _propagated_g(params, t)

    weights = residues(params, roots)
    g = (weights * np.exp(-1j * np.multiply.outer(np.asarray(t, dtype=float), roots))).sum(
        axis=-1
    )
    if np.ndim(g) == 0:
        return complex(g)
    return g


def _propagated_g(params: ModelParams, t: float | np.ndarray) -> complex | np.ndarray:
    def single(time: float) -> complex:
        if time == 0:
            return 1.0 + 0j
        trajectory = simulate(params, TimeGrid(t_end=time, dt=time))
        return complex(trajectory.g[-1])

    if np.ndim(t) == 0:
        return single(float(t))  # type: ignore[arg-type]
    return np.array([single(float(time)) for time in np.ravel(t)]).reshape(np.shape(t))


def survival_probability(trajectory: AmplitudeTrajectory) -> np.ndarray:
    """P(t) = |g(t)|^2."""
    return np.clip(np.abs(trajectory.g) ** 2, 0.0, 1.0)
