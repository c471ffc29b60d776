import argparse
import logging
import pathlib
import sys
import typing as t

from pydantic import BaseModel

from hqsl import __version__
from hqsl.analysis import (
    critical_n,
    kappa_crossover,
    omega_crossover,
    phase_boundary,
    reentrant_lines,
    sweep,
)
from hqsl.config import RunConfig, load_settings
from hqsl.exceptions import ConfigError, PropagationError
from hqsl.figures import FIGURES, SWEEP_COLUMNS, figure_panels, rows_table
from hqsl.measures import measure
from hqsl.models import PointStatus, ScanVariable
from hqsl.plotting import CurveRenderer, HeatMapRenderer
from hqsl.propagation import simulate, survival_probability
from hqsl.storage import IResultsStorage, LocalResultsStorage, OutputBundle, Table

DYNAMICS_COLUMNS = (
    "t",
    "re_g",
    "im_g",
    "survival",
    "re_c0",
    "im_c0",
    "re_csum",
    "im_csum",
)
MEASURE_COLUMNS = (
    "nonmarkovianity",
    "qsl_ratio_direct",
    "qsl_ratio_relation",
    "survival_at_tau",
    "consistency_residual",
)
CRITICAL_COLUMNS = ("scan", "critical", "reentrant")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


class RunSummary(BaseModel):
    command: str
    version: str = __version__
    config: RunConfig
    result: dict[str, t.Any]
    files: list[str] = []


def cmd_dynamics(config: RunConfig, with_plot: bool = False) -> OutputBundle:
    params = config.model_params()
    trajectory = simulate(params, config.time_grid())
    survival = survival_probability(trajectory)

    table = Table.from_records(
        DYNAMICS_COLUMNS,
        (
            {
                "t": t_k,
                "re_g": g.real,
                "im_g": g.imag,
                "survival": p,
                "re_c0": c0.real,
                "im_c0": c0.imag,
                "re_csum": csum.real,
                "im_csum": csum.imag,
            }
            for t_k, g, p, c0, csum in zip(
                trajectory.times, trajectory.g, survival, trajectory.c0, trajectory.csum
            )
        ),
    )
    summary = RunSummary(
        command="dynamics",
        config=config,
        result={
            "points": len(table.rows),
            "regime": str(params.regime),
            "survival_at_tau": float(survival[-1]),
        },
    )
    svg = None
    if with_plot:
        svg = CurveRenderer("t", "survival", title=f"{params.regime} qubit-m0 coupling").render(
            Table.from_csv(table.to_csv())
        )
    return OutputBundle(name="dynamics", table=table, summary=summary, svg=svg)


def cmd_measure(config: RunConfig) -> OutputBundle:
    trajectory = simulate(config.model_params(), config.time_grid())
    report = measure(trajectory, config.tau)

    table = Table.from_records(MEASURE_COLUMNS, [report.model_dump()])
    summary = RunSummary(command="measure", config=config, result=report.model_dump())
    return OutputBundle(name="measure", table=table, summary=summary)


def cmd_critical(config: RunConfig) -> OutputBundle:
    params = config.model_params()
    bracket = (config.bracket_lo, config.bracket_hi)

    critical: float | int | None
    crossings: list[tuple[float, float]] = []
    if config.scan == ScanVariable.OMEGA:
        if config.n_cavities < 2:
            raise ConfigError("An omega scan needs --n-cavities >= 2")
        crossover = omega_crossover(
            params, config.n_cavities, config.tau, bracket, config.dt, config.onset_threshold
        )
        critical, crossings = crossover.value, crossover.brackets
    elif config.scan == ScanVariable.N:
        critical = critical_n(
            params, config.omega, config.tau, config.n_max, config.dt, config.onset_threshold
        )
    else:
        crossover = kappa_crossover(
            params, config.tau, bracket, config.dt, config.onset_threshold
        )
        critical, crossings = crossover.value, crossover.brackets

    result = {
        "scan": str(config.scan),
        "critical": critical,
        "reentrant": len(crossings) > 1,
        "crossings": crossings,
    }
    table = Table.from_records(CRITICAL_COLUMNS, [result])
    summary = RunSummary(command="critical", config=config, result=result)
    return OutputBundle(name="critical", table=table, summary=summary)


def cmd_sweep(config: RunConfig, plot: str | None = None) -> OutputBundle:
    """Omega-N grid; plot names the column drawn in the SVG heat map, if any."""
    result = sweep(config.sweep_spec())
    table = rows_table(result.rows, SWEEP_COLUMNS)

    boundary = phase_boundary(result.rows, config.onset_threshold)
    summary = RunSummary(
        command="sweep",
        config=config,
        result={
            "points": len(result.rows),
            "failed": sum(row.status == PointStatus.FAILED for row in result.rows),
            "boundary": {str(n): omega for n, omega in boundary.items()},
            "reentrant": reentrant_lines(result.rows, config.onset_threshold),
            "metadata": result.metadata.model_dump(mode="json"),
        },
    )
    svg = None
    if plot:
        renderer = HeatMapRenderer(plot, threshold=config.onset_threshold)
        svg = renderer.render(Table.from_csv(table.to_csv()))
    return OutputBundle(name="sweep", table=table, summary=summary, svg=svg)


def cmd_repro(figure: str, config: RunConfig, with_plot: bool = False) -> list[OutputBundle]:
    bundles = []
    for panel in figure_panels(
        figure, config.tau, config.dt, config.workers, config.onset_threshold
    ):
        summary = RunSummary(
            command=f"repro-{figure}",
            config=config,
            result={"panel": panel.name, "points": len(panel.table.rows)},
        )
        svg = None
        if with_plot:
            svg = panel.renderer.render(Table.from_csv(panel.table.to_csv()))
        bundles.append(
            OutputBundle(name=panel.name, table=panel.table, summary=summary, svg=svg)
        )
    return bundles


def _add_model_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model (rates in units of omega0)")
    group.add_argument("--omega0", type=float, help="qubit-m0 coupling, the rate unit")
    group.add_argument("--gamma0", type=float, help="m0 loss rate")
    group.add_argument("--kappa", type=float, help="m0-m_n coupling")
    group.add_argument("--omega", type=float, help="nearest-neighbour coupling")
    group.add_argument("--gamma", type=float, help="second-layer loss rate")
    group.add_argument("--n-cavities", type=int, help="number of second-layer cavities")
    group.add_argument("--topology", choices=["reduced", "ring"])

    group = parser.add_argument_group("grid")
    group.add_argument("--tau", type=float, help="evolution time, units of 1/omega0")
    group.add_argument("--dt", type=float, help="output step, units of 1/omega0")

    group = parser.add_argument_group("output")
    group.add_argument("--config", type=pathlib.Path, help="key=value config file")
    group.add_argument("--out", type=pathlib.Path, help="CSV path (directory for repro-*)")
    group.add_argument("--svg", type=pathlib.Path, help="SVG path (directory for repro-*)")
    group.add_argument("--workers", type=int, help="process pool size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hqsl",
        description="Qubit in a hierarchical cavity environment: non-Markovianity and QSL time",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    dynamics = commands.add_parser("dynamics", help="g(t), c0(t) and sum c_n(t) on the grid")
    _add_model_arguments(dynamics)

    measure_parser = commands.add_parser("measure", help="N(Phi) and tau_QSL/tau at tau")
    _add_model_arguments(measure_parser)

    critical = commands.add_parser("critical", help="Markovian / non-Markovian crossover")
    _add_model_arguments(critical)
    critical.add_argument("--scan", choices=[str(v) for v in ScanVariable])
    critical.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"))
    critical.add_argument("--n-max", type=int)

    sweep_parser = commands.add_parser("sweep", help="measures over the Omega-N plane")
    _add_model_arguments(sweep_parser)
    sweep_parser.add_argument("--omega-start", type=float)
    sweep_parser.add_argument("--omega-stop", type=float)
    sweep_parser.add_argument("--omega-step", type=float)
    sweep_parser.add_argument("--n-min", type=int)
    sweep_parser.add_argument("--n-max", type=int)
    sweep_parser.add_argument(
        "--plot", choices=["qsl_ratio", "nonmarkovianity"], default="qsl_ratio"
    )

    for figure in FIGURES:
        repro = commands.add_parser(f"repro-{figure}", help=f"tables for {figure}")
        _add_model_arguments(repro)

    return parser


def _overrides(args: argparse.Namespace) -> dict[str, t.Any]:
    overrides = {
        name: getattr(args, name) for name in RunConfig.model_fields if hasattr(args, name)
    }
    if getattr(args, "bracket", None):
        overrides["bracket_lo"], overrides["bracket_hi"] = args.bracket
    return overrides


def _write(
    storage: IResultsStorage,
    bundle: OutputBundle,
    table_path: pathlib.Path,
    svg_path: pathlib.Path | None,
) -> list[str]:
    files = [str(storage.save_table(bundle.table, table_path))]
    if svg_path is not None and bundle.svg is not None:
        files.append(str(storage.save_svg(bundle.svg, svg_path)))
    summary_path = table_path.with_suffix(".json")
    files.append(str(summary_path))
    bundle.summary.files = files  # type: ignore[attr-defined]
    storage.save_summary(bundle.summary, summary_path)
    return files


def run(argv: t.Sequence[str]) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings()
    except ValueError as e:
        print(f"hqsl: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=settings.log_level)

    storage = LocalResultsStorage(results_path=settings.results_path)

    try:
        config = RunConfig.from_sources(settings, args.config, _overrides(args))
        if args.command.startswith("repro-"):
            figure = args.command.removeprefix("repro-")
            out_dir = args.out or storage.results_path
            bundles = cmd_repro(figure, config, with_plot=args.svg is not None)
            for bundle in bundles:
                svg_path = args.svg / f"{bundle.name}.svg" if args.svg else None
                _write(storage, bundle, out_dir / f"{bundle.name}.csv", svg_path)
                print(bundle.summary.model_dump_json())
            return EXIT_OK

        if args.command == "dynamics":
            bundle = cmd_dynamics(config, with_plot=args.svg is not None)
        elif args.command == "measure":
            bundle = cmd_measure(config)
        elif args.command == "critical":
            bundle = cmd_critical(config)
        else:
            bundle = cmd_sweep(config, plot=args.plot if args.svg else None)
    except (ConfigError, ValueError) as e:
        print(f"hqsl {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PropagationError, ArithmeticError) as e:
        print(f"hqsl {args.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL

    _write(storage, bundle, args.out or storage.get_table_path(bundle.name), args.svg)
    print(bundle.summary.model_dump_json())
    return EXIT_OK


def execute() -> None:
    sys.exit(run(sys.argv[1:]))


def repro_fig2() -> None:
    sys.exit(run(["repro-fig2", *sys.argv[1:]]))


def repro_fig3() -> None:
    sys.exit(run(["repro-fig3", *sys.argv[1:]]))


def repro_fig4() -> None:
    sys.exit(run(["repro-fig4", *sys.argv[1:]]))


def repro_fig5() -> None:
    sys.exit(run(["repro-fig5", *sys.argv[1:]]))


if __name__ == "__main__":
    execute()
