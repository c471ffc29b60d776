import io
import math
import typing as t
from abc import ABC, abstractmethod

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from hqsl.analysis import phase_boundary
from hqsl.models import ONSET_THRESHOLD, PointStatus, SweepRow
from hqsl.storage import Table

LABELS = {
    "t": r"$t\,\Omega_0$",
    "survival": r"$|g(t)|^2$",
    "omega": r"$\Omega/\Omega_0$",
    "kappa": r"$\kappa/\Omega_0$",
    "n": r"$N$",
    "nonmarkovianity": r"$\mathcal{N}(\Phi)$",
    "qsl_ratio": r"$\tau_{QSL}/\tau$",
    "qsl_ratio_direct": r"$\tau_{QSL}/\tau$",
    "survival_at_tau": r"$|g(\tau)|^2$",
}


class IPlotRenderer(ABC):
    @abstractmethod
    def render(self, table: Table) -> str:
        """SVG document drawn from an already-serialized table."""
        ...


def _to_svg(figure: Figure) -> str:
    buffer = io.StringIO()
    # fixed hash salt and no date keep the document byte-stable
    with matplotlib.rc_context({"svg.hashsalt": "hqsl"}):
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def sweep_rows(table: Table) -> list[SweepRow]:
    return [
        SweepRow(
            omega=float(record["omega"]),
            n=int(record["n"]),
            nonmarkovianity=float(record["nonmarkovianity"]),
            qsl_ratio=float(record["qsl_ratio"]),
            qsl_ratio_direct=float(record["qsl_ratio_direct"]),
            survival_at_tau=float(record["survival_at_tau"]),
            non_markovian=record.get("non_markovian") == "true",
            speedup=record.get("speedup") == "true",
            status=PointStatus(record["status"]),
        )
        for record in table.records()
    ]


class HeatMapRenderer(IPlotRenderer):
    """Value over the Omega-N plane with the Markovian / non-Markovian boundary."""

    def __init__(
        self,
        value_column: str = "qsl_ratio",
        title: str = "",
        threshold: float = ONSET_THRESHOLD,
    ) -> None:
        self.value_column = value_column
        self.title = title
        self.threshold = threshold

    def render(self, table: Table) -> str:
        rows = sweep_rows(table)
        omegas = sorted({row.omega for row in rows})
        ns = sorted({row.n for row in rows})
        grid = np.full((len(ns), len(omegas)), np.nan)
        for row in rows:
            value = getattr(row, self.value_column)
            grid[ns.index(row.n), omegas.index(row.omega)] = value

        figure = Figure(figsize=(6, 4.5))
        ax = figure.subplots()
        half = 0.5 * (omegas[1] - omegas[0]) if len(omegas) > 1 else 0.5
        image = ax.imshow(
            grid,
            origin="lower",
            aspect="auto",
            cmap="viridis",
            extent=(omegas[0] - half, omegas[-1] + half, ns[0] - 0.5, ns[-1] + 0.5),
        )
        label = LABELS.get(self.value_column, self.value_column)
        figure.colorbar(image, ax=ax, label=label)

        boundary = phase_boundary(rows, self.threshold)
        points = [(omega, n) for n, omega in boundary.items() if omega is not None]
        if points:
            xs, ys = zip(*points)
            ax.plot(xs, ys, color="white", marker="o", linewidth=1.5, label="boundary")
            ax.legend(loc="upper left")

        ax.set_xlabel(LABELS["omega"])
        ax.set_ylabel(LABELS["n"])
        ax.set_title(self.title)
        figure.tight_layout()
        return _to_svg(figure)


class CurveRenderer(IPlotRenderer):
    """y against x, one line per value of series_column (a single line without one)."""

    def __init__(
        self,
        x_column: str,
        y_column: str,
        series_column: str | None = None,
        reference: float | None = None,
        title: str = "",
    ) -> None:
        self.x_column = x_column
        self.y_column = y_column
        self.series_column = series_column
        self.reference = reference
        self.title = title

    def render(self, table: Table) -> str:
        records = [r for r in table.records() if r.get("status", "ok") == "ok"]
        series: dict[t.Any, list[tuple[float, float]]] = {}
        for record in records:
            y = float(record[self.y_column])
            if math.isnan(y):
                continue
            key = record[self.series_column] if self.series_column else ""
            series.setdefault(key, []).append((float(record[self.x_column]), y))

        figure = Figure(figsize=(6, 4.5))
        ax = figure.subplots()
        for key in sorted(series):
            xs, ys = zip(*sorted(series[key]))
            label = f"{self.series_column}={key}" if self.series_column else None
            ax.plot(xs, ys, label=label)
        if self.reference is not None:
            ax.axhline(
                self.reference,
                color="tab:blue",
                linestyle="--",
                label=f"no second layer ({self.reference:.3f})",
            )

        ax.set_xlabel(LABELS.get(self.x_column, self.x_column))
        ax.set_ylabel(LABELS.get(self.y_column, self.y_column))
        ax.set_title(self.title)
        if self.series_column or self.reference is not None:
            ax.legend()
        figure.tight_layout()
        return _to_svg(figure)
