from abc import ABC

from hqsl.figures import SWEEP_COLUMNS, rows_table
from hqsl.models import PointStatus, SweepRow
from hqsl.plotting import CurveRenderer, HeatMapRenderer, IPlotRenderer, sweep_rows
from hqsl.storage import Table


def sweep_table() -> Table:
    rows = [
        SweepRow(
            omega=omega,
            n=n,
            nonmarkovianity=max(0.0, 0.1 * (n - 2) - omega),
            qsl_ratio=1.0 if 0.1 * (n - 2) <= omega else 0.8,
            qsl_ratio_direct=1.0,
            survival_at_tau=0.1,
            non_markovian=0.1 * (n - 2) > omega,
            speedup=0.1 * (n - 2) > omega,
            status=PointStatus.OK,
        )
        for n in (2, 3, 4)
        for omega in (0.0, 0.05, 0.1, 0.15)
    ]
    return Table.from_csv(rows_table(rows, SWEEP_COLUMNS).to_csv())


def test_renderer_interfaces():
    assert issubclass(IPlotRenderer, ABC)
    assert issubclass(HeatMapRenderer, IPlotRenderer)
    assert issubclass(CurveRenderer, IPlotRenderer)


def test_sweep_rows_from_table():
    rows = sweep_rows(sweep_table())

    assert len(rows) == 12
    assert rows[0].n == 2
    assert rows[-1].omega == 0.15
    assert rows[-1].status == PointStatus.OK
    assert (rows[8].n, rows[8].omega) == (4, 0.0)
    assert rows[8].non_markovian
    assert rows[8].speedup
    assert not rows[0].non_markovian


def test_heat_map_is_stable_svg():
    renderer = HeatMapRenderer("qsl_ratio", title="weak qubit-m0 coupling")

    svg = renderer.render(sweep_table())

    assert "<svg" in svg
    assert svg == renderer.render(sweep_table())


def test_curve_skips_failed_points():
    table = Table(
        columns=("omega", "n", "nonmarkovianity", "status"),
        rows=(
            (0.0, 2, 0.1, "ok"),
            (0.5, 2, float("nan"), "failed"),
            (1.0, 2, 0.0, "ok"),
            (0.0, 4, 0.3, "ok"),
            (1.0, 4, 0.2, "ok"),
        ),
    )

    svg = CurveRenderer("omega", "nonmarkovianity", "n", reference=0.7145).render(table)

    assert "<svg" in svg
