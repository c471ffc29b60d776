import typing as t
from dataclasses import dataclass

import numpy as np

from hqsl.analysis import scan, sweep
from hqsl.generators import baseline_params
from hqsl.measures import measure
from hqsl.models import (
    ONSET_THRESHOLD,
    MeasureReport,
    ModelParams,
    ScanVariable,
    SweepRow,
    SweepSpec,
    TimeGrid,
)
from hqsl.plotting import CurveRenderer, HeatMapRenderer, IPlotRenderer
from hqsl.propagation import simulate
from hqsl.storage import Table

FIGURES = ("fig2", "fig3", "fig4", "fig5")

SCAN_COLUMNS = (
    "kappa",
    "omega",
    "n",
    "nonmarkovianity",
    "qsl_ratio",
    "qsl_ratio_direct",
    "survival_at_tau",
    "non_markovian",
    "speedup",
    "status",
)
SWEEP_COLUMNS = (
    "omega",
    "n",
    "nonmarkovianity",
    "qsl_ratio",
    "qsl_ratio_direct",
    "survival_at_tau",
    "non_markovian",
    "speedup",
    "status",
)

WEAK = ModelParams(gamma0=5.0, kappa=5.0, gamma=5.0)
STRONG = ModelParams(gamma0=0.2, kappa=0.2, gamma=0.2)

OMEGA_AXIS = tuple(np.round(np.arange(0, 5.0001, 0.1), 10).tolist())
KAPPA_AXIS = tuple(np.round(np.arange(0, 10.0001, 0.1), 10).tolist())
N_AXIS = tuple(range(2, 13))


@dataclass(frozen=True)
class Panel:
    name: str
    table: Table
    renderer: IPlotRenderer


def rows_table(
    rows: t.Iterable[SweepRow], columns: t.Sequence[str] = SCAN_COLUMNS
) -> Table:
    return Table.from_records(columns, (row.model_dump() for row in rows))


def baseline_report(params: ModelParams, tau: float, dt: float) -> MeasureReport:
    """Measures of the same qubit and m0 with the second layer removed."""
    base = baseline_params(params)
    return measure(simulate(base, TimeGrid(t_end=tau, dt=dt)), tau)


def _family(
    template: ModelParams,
    variable: ScanVariable,
    values: t.Sequence[float],
    field: str,
    levels: t.Sequence[float],
    tau: float,
    dt: float,
    workers: int,
    threshold: float,
) -> Table:
    """One scan per level of field, concatenated."""
    rows: list[SweepRow] = []
    for level in levels:
        rows.extend(
            scan(template.replace(**{field: level}), variable, values, tau, dt, workers, threshold)
        )
    return rows_table(rows)


def _phase_diagram(
    template: ModelParams, tau: float, dt: float, workers: int, threshold: float
) -> Table:
    spec = SweepSpec(
        omega_range=(0.0, 5.0, 0.05),
        n_range=(2, 8),
        fixed=template,
        tau=tau,
        dt=dt,
        workers=workers,
        onset_threshold=threshold,
    )
    return rows_table(sweep(spec).rows, SWEEP_COLUMNS)


# name -> (template, scanned variable, axis, series field, series levels, y column)
CURVES: dict[str, tuple[ModelParams, ScanVariable, tuple, str, tuple, str]] = {
    "fig2a": (WEAK.replace(omega=1.0), ScanVariable.KAPPA, KAPPA_AXIS, "n_cavities", (2, 3, 4, 6), "nonmarkovianity"),
    "fig2b": (WEAK.replace(n_cavities=4), ScanVariable.KAPPA, KAPPA_AXIS, "omega", (0.0, 0.5, 1.0, 1.5), "nonmarkovianity"),
    "fig2c": (WEAK, ScanVariable.OMEGA, OMEGA_AXIS, "n_cavities", (2, 4, 6, 8), "nonmarkovianity"),
    "fig2d": (WEAK, ScanVariable.N, N_AXIS, "omega", (0.0, 0.5, 1.0, 1.5), "nonmarkovianity"),
    "fig3a": (STRONG, ScanVariable.OMEGA, OMEGA_AXIS, "n_cavities", (2, 4, 6, 8), "nonmarkovianity"),
    "fig3b": (STRONG, ScanVariable.N, N_AXIS, "omega", (0.0, 1.0, 2.0, 3.0), "nonmarkovianity"),
    "fig4a": (WEAK, ScanVariable.OMEGA, OMEGA_AXIS, "n_cavities", (2, 4, 6, 8), "qsl_ratio"),
    "fig4b": (WEAK, ScanVariable.N, N_AXIS, "omega", (0.0, 0.5, 1.0, 1.5), "qsl_ratio"),
    "fig5a": (STRONG, ScanVariable.OMEGA, OMEGA_AXIS, "n_cavities", (2, 4, 6, 8), "qsl_ratio"),
    "fig5b": (STRONG, ScanVariable.N, N_AXIS, "omega", (0.0, 1.0, 2.0, 3.0), "qsl_ratio"),
}  # fmt: skip

SERIES_COLUMNS = {"n_cavities": "n", "omega": "omega"}


def _curve_panel(name: str, tau: float, dt: float, workers: int, threshold: float) -> Panel:
    template, variable, axis, field, levels, y_column = CURVES[name]
    reference = None
    if template.regime == STRONG.regime:
        report = baseline_report(template, tau, dt)
        if y_column == "nonmarkovianity":
            reference = report.nonmarkovianity
        else:
            reference = report.qsl_ratio_relation

    table = _family(template, variable, axis, field, levels, tau, dt, workers, threshold)
    renderer = CurveRenderer(
        str(variable),
        y_column,
        SERIES_COLUMNS[field],
        reference=reference,
        title=f"{template.regime} qubit-m0 coupling",
    )
    return Panel(name, table, renderer)


def figure_panels(
    figure: str,
    tau: float = 3.0,
    dt: float = 1e-3,
    workers: int = 1,
    threshold: float = ONSET_THRESHOLD,
) -> list[Panel]:
    if figure not in FIGURES:
        raise ValueError(f"Unknown figure {figure!r}; expected one of {FIGURES}")

    panels = [
        _curve_panel(name, tau, dt, workers, threshold)
        for name in CURVES
        if name.startswith(figure)
    ]
    if figure == "fig4":
        panels.append(
            Panel(
                "fig4c",
                _phase_diagram(WEAK, tau, dt, workers, threshold),
                HeatMapRenderer("qsl_ratio", title="weak qubit-m0 coupling", threshold=threshold),
            )
        )
    return panels
