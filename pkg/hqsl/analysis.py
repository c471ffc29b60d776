import logging
import math
import typing as t
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.optimize import bisect

from hqsl.exceptions import HqslError
from hqsl.measures import (
    is_non_markovian,
    is_speedup,
    measure,
    nonmarkovianity,
    onset_qsl_ratio,
)
from hqsl.models import (
    ONSET_THRESHOLD,
    Crossover,
    ModelParams,
    PointStatus,
    ScanVariable,
    SweepMetadata,
    SweepResult,
    SweepRow,
    SweepSpec,
    TimeGrid,
)
from hqsl.propagation import simulate

SCAN_STEP = 0.05
BISECTION_XTOL = 1e-3
MIN_RING_SIZE = 2

_FIELDS = {
    ScanVariable.KAPPA: "kappa",
    ScanVariable.OMEGA: "omega",
    ScanVariable.N: "n_cavities",
}

# (template, changes, tau, dt, onset threshold)
Job = tuple[ModelParams, dict[str, t.Any], float, float, float]


def nonmarkovianity_at(params: ModelParams, tau: float, dt: float = 1e-3) -> float:
    return nonmarkovianity(simulate(params, TimeGrid(t_end=tau, dt=dt)), tau)


def evaluate_point(job: Job) -> SweepRow:
    """Measures for one parameter point; failures become a flagged row."""
    template, changes, tau, dt, threshold = job
    coordinates = {
        "kappa": changes.get("kappa", template.kappa),
        "omega": changes.get("omega", template.omega),
        "n": changes.get("n_cavities", template.n_cavities),
    }
    try:
        params = template.replace(**changes)
        report = measure(simulate(params, TimeGrid(t_end=tau, dt=dt)), tau)
    except (HqslError, ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        logging.warning(f"Point {coordinates} failed: {e}")
        return SweepRow(
            **coordinates,
            nonmarkovianity=math.nan,
            qsl_ratio=math.nan,
            qsl_ratio_direct=math.nan,
            survival_at_tau=math.nan,
            status=PointStatus.FAILED,
        )

    qsl_ratio = onset_qsl_ratio(report, threshold)
    return SweepRow(
        **coordinates,
        nonmarkovianity=report.nonmarkovianity,
        qsl_ratio=qsl_ratio,
        qsl_ratio_direct=report.qsl_ratio_direct,
        survival_at_tau=report.survival_at_tau,
        non_markovian=is_non_markovian(report.nonmarkovianity, threshold),
        speedup=is_speedup(qsl_ratio),
    )


def run_jobs(jobs: list[Job], workers: int = 1) -> list[SweepRow]:
    """Evaluate every job; the result order is the job order whatever the pool size."""
    if workers <= 1 or len(jobs) <= 1:
        return [evaluate_point(job) for job in jobs]

    chunksize = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(evaluate_point, jobs, chunksize=chunksize))


def _scan_values(bracket: tuple[float, float], step: float) -> list[float]:
    lo, hi = bracket
    if not lo < hi:
        raise ValueError(f"Bracket must satisfy lo < hi, got {bracket}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    values = [lo + k * step for k in range(count)]
    if hi - values[-1] > 1e-12:
        values.append(hi)
    return values


def _flips(flags: t.Sequence[bool]) -> list[int]:
    """Indices k where flags[k] != flags[k + 1]."""
    return [k for k in range(len(flags) - 1) if flags[k] != flags[k + 1]]


def _crossover(
    make_params: t.Callable[[float], ModelParams],
    bracket: tuple[float, float],
    tau: float,
    dt: float,
    threshold: float,
    name: str,
) -> Crossover:
    """Scan for sign changes of N(Phi) - threshold, then bisect the first one."""

    def excess(x: float) -> float:
        return nonmarkovianity_at(make_params(x), tau, dt) - threshold

    values = _scan_values(bracket, SCAN_STEP)
    flips = _flips([excess(x) > 0 for x in values])
    if not flips:
        logging.info(f"No {name} crossing in {bracket}")
        return Crossover(value=None)

    brackets = [(values[k], values[k + 1]) for k in flips]
    k = flips[0]
    critical = float(bisect(excess, values[k], values[k + 1], xtol=BISECTION_XTOL))
    if len(flips) > 1:
        logging.warning(
            f"{len(flips)} {name} crossings in {bracket}: re-entrant beyond {brackets[1][0]:.2f}; "
            f"returning the first"
        )
    logging.info(f"Critical {name} = {critical:.4f}")
    return Crossover(value=critical, brackets=brackets)


def omega_crossover(
    template: ModelParams,
    n: int,
    tau: float,
    bracket: tuple[float, float],
    dt: float = 1e-3,
    threshold: float = ONSET_THRESHOLD,
) -> Crossover:
    return _crossover(
        lambda omega: template.replace(omega=omega, n_cavities=n),
        bracket,
        tau,
        dt,
        threshold,
        "omega",
    )


def critical_omega(
    template: ModelParams,
    n: int,
    tau: float,
    bracket: tuple[float, float],
    dt: float = 1e-3,
    threshold: float = ONSET_THRESHOLD,
) -> float | None:
    """Nearest-neighbour coupling of the first Markovian / non-Markovian crossing for N = n."""
    return omega_crossover(template, n, tau, bracket, dt, threshold).value


def kappa_crossover(
    template: ModelParams,
    tau: float,
    bracket: tuple[float, float],
    dt: float = 1e-3,
    threshold: float = ONSET_THRESHOLD,
) -> Crossover:
    return _crossover(
        lambda kappa: template.replace(kappa=kappa),
        bracket,
        tau,
        dt,
        threshold,
        "kappa",
    )


def critical_kappa(
    template: ModelParams,
    tau: float,
    bracket: tuple[float, float],
    dt: float = 1e-3,
    threshold: float = ONSET_THRESHOLD,
) -> float | None:
    """m0-m_n coupling at which the dynamics first turns non-Markovian."""
    return kappa_crossover(template, tau, bracket, dt, threshold).value


def critical_n(
    template: ModelParams,
    omega: float,
    tau: float,
    n_max: int,
    dt: float = 1e-3,
    threshold: float = ONSET_THRESHOLD,
) -> int | None:
    """Smallest cavity number in [2, n_max] giving non-Markovian dynamics."""
    if n_max < MIN_RING_SIZE:
        raise ValueError(f"n_max must be >= {MIN_RING_SIZE}, got {n_max}")

    for n in range(MIN_RING_SIZE, n_max + 1):
        params = template.replace(omega=omega, n_cavities=n)
        if is_non_markovian(nonmarkovianity_at(params, tau, dt), threshold):
            logging.info(f"Critical N = {n} at omega = {omega}")
            return n
    return None


def scan(
    template: ModelParams,
    variable: ScanVariable,
    values: t.Sequence[float],
    tau: float,
    dt: float = 1e-3,
    workers: int = 1,
    threshold: float = ONSET_THRESHOLD,
) -> list[SweepRow]:
    """Measures along one parameter, in the order of values."""
    field = _FIELDS[variable]
    jobs: list[Job] = [
        (
            template,
            {field: int(v) if variable == ScanVariable.N else float(v)},
            tau,
            dt,
            threshold,
        )
        for v in values
    ]
    return run_jobs(jobs, workers)


def sweep(spec: SweepSpec) -> SweepResult:
    """Measures on the Omega-N grid, rows sorted by (n, omega)."""
    jobs: list[Job] = [
        (spec.fixed, {"omega": omega, "n_cavities": n}, spec.tau, spec.dt, spec.onset_threshold)
        for n in spec.n_values()
        for omega in spec.omega_values()
    ]
    logging.info(f"Sweeping {len(jobs)} points on {spec.workers} worker(s)")
    rows = run_jobs(jobs, spec.workers)

    failed = sum(row.status == PointStatus.FAILED for row in rows)
    if failed:
        logging.warning(f"{failed} of {len(rows)} sweep points failed")
    return SweepResult(rows=rows, metadata=SweepMetadata(spec=spec))


def _lines(rows: t.Sequence[SweepRow]) -> dict[int, list[SweepRow]]:
    """Successful rows per N, ordered by omega."""
    return {
        n: sorted(
            (row for row in rows if row.n == n and row.status == PointStatus.OK),
            key=lambda row: row.omega,
        )
        for n in sorted({row.n for row in rows})
    }


def phase_boundary(
    rows: t.Sequence[SweepRow], threshold: float = ONSET_THRESHOLD
) -> dict[int, float | None]:
    """Per N, the omega midway across the first Markovian / non-Markovian transition.

    A line that never changes keeps its last omega when non-Markovian throughout and
    None when Markovian throughout.
    """
    boundary: dict[int, float | None] = {}
    for n, line in _lines(rows).items():
        marked = [is_non_markovian(row.nonmarkovianity, threshold) for row in line]
        flips = _flips(marked)
        if flips:
            k = flips[0]
            boundary[n] = 0.5 * (line[k].omega + line[k + 1].omega)
        elif marked and marked[0]:
            boundary[n] = line[-1].omega
        else:
            boundary[n] = None
    return boundary


def reentrant_lines(rows: t.Sequence[SweepRow], threshold: float = ONSET_THRESHOLD) -> list[int]:
    """N values whose line crosses between Markovian and non-Markovian more than once."""
    return [
        n
        for n, line in _lines(rows).items()
        if len(_flips([is_non_markovian(row.nonmarkovianity, threshold) for row in line])) > 1
    ]
