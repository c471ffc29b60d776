import numpy as np

from hqsl.models import Basis, Generator, ModelParams, QubitState, Topology

AMPLITUDE_ATOL = 1e-9


def reduced_generator(params: ModelParams) -> Generator:
    """3x3 generator acting on (g, c0, C) with C the sum of the second-layer amplitudes.

    Every cavity of the ring couples to m0 identically, so the uniform mode is the
    only one the qubit ever sees; it carries the ring self-energy 2*omega. Its
    normalized amplitude is C / sqrt(N), which is what `scale` records.
    """
    if params.topology != Topology.REDUCED_SYMMETRIC:
        raise ValueError(f"reduced_generator needs the reduced topology, got {params.topology}")

    n = params.n_cavities
    m = np.array(
        [
            [0, params.omega0, 0],
            [params.omega0, -0.5j * params.gamma0, params.kappa],
            [0, params.kappa * n, 2 * params.omega - 0.5j * params.gamma],
        ],
        dtype=complex,
    )
    uniform = 1 / np.sqrt(n) if n > 0 else 0.0
    return Generator(entries=m, basis=Basis.REDUCED, scale=np.array([1.0, 1.0, uniform]))


def ring_adjacency(n: int) -> np.ndarray:
    """Nearest-neighbour adjacency of an n-cavity ring.

    For n=2 both ring bonds join the same pair, which doubles it; every node then has a
    total neighbour coupling of 2, as for larger rings.
    """
    identity = np.eye(n)
    return np.roll(identity, 1, axis=1) + np.roll(identity, -1, axis=1)


def full_generator(params: ModelParams) -> Generator:
    """(N+2)x(N+2) generator in the basis (atom, m0, m1, ..., mN)."""
    if params.topology != Topology.RING_EXPLICIT:
        raise ValueError(f"full_generator needs the ring topology, got {params.topology}")
    n = params.n_cavities
    if n < 2:
        raise ValueError(f"The explicit ring needs at least 2 cavities, got {n}")

    m = np.zeros((n + 2, n + 2), dtype=complex)
    m[0, 1] = m[1, 0] = params.omega0
    m[1, 1] = -0.5j * params.gamma0
    m[1, 2:] = params.kappa
    m[2:, 1] = params.kappa
    m[2:, 2:] = params.omega * ring_adjacency(n) - 0.5j * params.gamma * np.eye(n)
    return Generator(entries=m, basis=Basis.LATTICE)


def build_generator(params: ModelParams) -> Generator:
    if params.topology == Topology.RING_EXPLICIT:
        return full_generator(params)
    return reduced_generator(params)


def evolve_qubit_state(rho0: QubitState, g: complex) -> QubitState:
    """Apply the amplitude-damping channel fixed by the survival amplitude g."""
    population = abs(g) ** 2
    if population > (1 + AMPLITUDE_ATOL) ** 2:
        raise ValueError(f"|g|={abs(g)} exceeds 1: the amplitudes have blown up")
    if population > 1:
        g = g / abs(g)
        population = 1.0

    r = rho0.matrix
    rho = np.array(
        [
            [r[0, 0] * population, r[0, 1] * np.conj(g)],
            [r[1, 0] * g, r[1, 1] + r[0, 0] * (1 - population)],
        ]
    )
    return QubitState(rho)


def qubit_state_rate(rho0: QubitState, g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """d rho/dt of the channel output, stacked over time: shape (len(g), 2, 2)."""
    g = np.asarray(g, dtype=complex)
    dg = np.asarray(dg, dtype=complex)
    dp = 2 * np.real(np.conj(g) * dg)
    r = rho0.matrix

    rate = np.empty(g.shape + (2, 2), dtype=complex)
    rate[..., 0, 0] = r[0, 0] * dp
    rate[..., 0, 1] = r[0, 1] * np.conj(dg)
    rate[..., 1, 0] = r[1, 0] * dg
    rate[..., 1, 1] = -r[0, 0] * dp
    return rate


def baseline_params(params: ModelParams) -> ModelParams:
    """The same qubit and m0 without a second layer."""
    return params.replace(
        kappa=0.0, omega=0.0, n_cavities=0, topology=Topology.REDUCED_SYMMETRIC
    )
