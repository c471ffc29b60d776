import logging

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from hqsl.exceptions import DegenerateEvolutionError
from hqsl.generators import evolve_qubit_state
from hqsl.models import (
    ONSET_THRESHOLD,
    SPEEDUP_ATOL,
    AmplitudeTrajectory,
    MeasureReport,
    QubitState,
)
from hqsl.propagation import survival_probability

CROSSING_XTOL = 1e-10


def survival_rate(trajectory: AmplitudeTrajectory) -> np.ndarray:
    """dP/dt = 2 Re(g* dg/dt)."""
    return 2 * np.real(np.conj(trajectory.g) * trajectory.dg)


def _survival_spline(trajectory: AmplitudeTrajectory) -> CubicHermiteSpline:
    return CubicHermiteSpline(
        trajectory.times, survival_probability(trajectory), survival_rate(trajectory)
    )


def _crossing(rate, lo: float, hi: float) -> float:
    """Zero of the rate inside [lo, hi]."""
    f_lo, f_hi = rate(lo), rate(hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        # sign flip lost to rounding at a knot
        return lo if abs(f_lo) < abs(f_hi) else hi
    return brentq(rate, lo, hi, xtol=CROSSING_XTOL)


def _rising_runs(rising: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs [i, j] (inclusive) of True."""
    padded = np.concatenate(([False], rising, [False])).astype(int)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), stops.tolist()))


def increasing_intervals(trajectory: AmplitudeTrajectory) -> list[tuple[float, float]]:
    """Maximal intervals on which P(t) increases, endpoints refined to CROSSING_XTOL."""
    times = trajectory.times
    if len(times) < 2:
        return []
    rate = _survival_spline(trajectory).derivative()
    rising = survival_rate(trajectory) > 0
    last = len(times) - 1

    intervals = []
    for i, j in _rising_runs(rising):
        a = times[0] if i == 0 else _crossing(rate, times[i - 1], times[i])
        b = times[last] if j == last else _crossing(rate, times[j], times[j + 1])
        intervals.append((float(a), float(b)))
    return intervals


def sign_changes(trajectory: AmplitudeTrajectory) -> np.ndarray:
    """Times at which dP/dt changes sign between grid points."""
    times = trajectory.times
    if len(times) < 2:
        return np.empty(0)
    rate = _survival_spline(trajectory).derivative()
    rising = survival_rate(trajectory) > 0
    flips = np.flatnonzero(rising[1:] != rising[:-1])
    return np.array([_crossing(rate, times[k], times[k + 1]) for k in flips])


def nonmarkovianity(trajectory: AmplitudeTrajectory, tau: float) -> float:
    """BLP non-Markovianity over [0, tau]: the integral of the positive part of dP/dt."""
    part = trajectory.truncate(tau)
    if len(part.times) < 2:
        return 0.0
    spline = _survival_spline(part)
    backflow = sum(
        max(float(spline(b) - spline(a)), 0.0) for a, b in increasing_intervals(part)
    )
    return float(backflow)


def trace_distance(rho1: QubitState, rho2: QubitState) -> float:
    """Half the trace norm of rho1 - rho2."""
    singular_values = np.linalg.svd(rho1.matrix - rho2.matrix, compute_uv=False)
    return float(0.5 * singular_values.sum())


def bures_angle(initial: QubitState, target: QubitState) -> float:
    """arccos sqrt(<phi0|rho|phi0>) for a pure initial state |phi0><phi0|."""
    values, vectors = np.linalg.eigh(initial.matrix)
    phi0 = vectors[:, np.argmax(values)]
    fidelity = float(np.real(phi0.conj() @ target.matrix @ phi0))
    return float(np.arccos(np.sqrt(np.clip(fidelity, 0.0, 1.0))))


def _speed_integral(trajectory: AmplitudeTrajectory) -> float:
    """Integral of |dP/dt|, the operator norm of d rho/dt for an excited initial state.

    Summed exactly over the monotone pieces of the survival spline.
    """
    times = trajectory.times
    if len(times) < 2:
        return 0.0
    knots = np.concatenate(([times[0]], sign_changes(trajectory), [times[-1]]))
    return float(np.abs(np.diff(_survival_spline(trajectory)(knots))).sum())


def qsl_ratio_direct(trajectory: AmplitudeTrajectory, tau: float) -> float:
    """tau_QSL / tau from the Bures angle and the time-averaged operator norm of d rho/dt."""
    part = trajectory.truncate(tau)
    rho0 = QubitState.excited()
    target = evolve_qubit_state(rho0, complex(part.g[-1]))
    distance = np.sin(bures_angle(rho0, target)) ** 2

    travelled = _speed_integral(part)
    if travelled <= 0:
        logging.warning(f"No evolution over [0, {tau}]: tau_QSL/tau set to 1")
        return 1.0
    # tau_QSL = distance / (travelled / tau)
    return float(min(distance / travelled, 1.0))


def qsl_ratio_relation(nonmark: float, survival_at_tau: float) -> float:
    """tau_QSL / tau = (1 - P) / (2 N + 1 - P)."""
    if nonmark < 0:
        raise ValueError(f"Non-Markovianity must be >= 0, got {nonmark}")
    if not 0 <= survival_at_tau <= 1:
        raise ValueError(f"Survival probability must lie in [0, 1], got {survival_at_tau}")
    if nonmark == 0:
        if survival_at_tau == 1:
            raise DegenerateEvolutionError("P(tau) = 1 with no backflow: the qubit did not evolve")
        return 1.0
    return (1 - survival_at_tau) / (2 * nonmark + 1 - survival_at_tau)


def measure(trajectory: AmplitudeTrajectory, tau: float) -> MeasureReport:
    nonmark = nonmarkovianity(trajectory, tau)
    survival = float(survival_probability(trajectory)[trajectory.grid.index_of(tau)])
    direct = qsl_ratio_direct(trajectory, tau)

    degenerate = False
    try:
        relation = qsl_ratio_relation(nonmark, survival)
    except DegenerateEvolutionError as e:
        logging.warning(f"{e}; tau_QSL/tau set to 1")
        relation = 1.0
        degenerate = True

    return MeasureReport(
        tau=tau,
        nonmarkovianity=nonmark,
        qsl_ratio_direct=direct,
        qsl_ratio_relation=relation,
        survival_at_tau=survival,
        consistency_residual=abs(direct - relation),
        degenerate=degenerate,
    )


def is_non_markovian(nonmark: float, threshold: float = ONSET_THRESHOLD) -> bool:
    return nonmark > threshold


def is_speedup(qsl_ratio: float) -> bool:
    return qsl_ratio < 1 - SPEEDUP_ATOL


def onset_qsl_ratio(report: MeasureReport, threshold: float = ONSET_THRESHOLD) -> float:
    """Relation-based tau_QSL/tau with backflow at or below the onset threshold counted as none."""
    if not is_non_markovian(report.nonmarkovianity, threshold):
        return 1.0
    return report.qsl_ratio_relation
