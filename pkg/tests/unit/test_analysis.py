import math

import pytest

from hqsl.analysis import (
    critical_kappa,
    critical_n,
    critical_omega,
    evaluate_point,
    nonmarkovianity_at,
    omega_crossover,
    phase_boundary,
    reentrant_lines,
    run_jobs,
    scan,
    sweep,
)
from hqsl.exceptions import NormGrowthError
from hqsl.figures import STRONG, baseline_report
from hqsl.models import (
    ONSET_THRESHOLD,
    MeasureReport,
    ModelParams,
    PointStatus,
    ScanVariable,
    SweepRow,
    SweepSpec,
)


def row(omega: float, n: int, nonmark: float, status=PointStatus.OK) -> SweepRow:
    return SweepRow(
        omega=omega,
        n=n,
        nonmarkovianity=nonmark,
        qsl_ratio=1.0,
        qsl_ratio_direct=1.0,
        survival_at_tau=0.5,
        status=status,
    )


@pytest.mark.parametrize("n, expected", [(6, 2.39), (8, 3.25)])
def test_critical_omega_weak_coupling(weak_hierarchy, n, expected):
    critical = critical_omega(weak_hierarchy, n, 3.0, (0.0, 5.0))

    assert critical == pytest.approx(expected, abs=0.05)


def test_critical_omega_none_without_crossing(weak_hierarchy):
    assert critical_omega(weak_hierarchy, 2, 3.0, (0.0, 5.0)) is None


def test_reentrant_omega_window_is_flagged(weak_hierarchy):
    crossover = omega_crossover(weak_hierarchy, 8, 3.0, (0.0, 5.0))

    assert crossover.value == pytest.approx(3.25, abs=0.05)
    assert crossover.reentrant
    lo, hi = crossover.brackets[0]
    assert lo <= crossover.value <= hi
    assert 4.2 <= crossover.brackets[1][0] <= 4.3


# Markovian up to N = 3 for omega <= 1 and up to N = 4 at omega = 1.5
@pytest.mark.parametrize("omega, expected", [(0.0, 4), (0.5, 4), (1.0, 4), (1.5, 5)])
def test_critical_n_weak_coupling(weak_hierarchy, omega, expected):
    assert critical_n(weak_hierarchy, omega, 3.0, 12) == expected


def test_critical_n_validates_range(weak_hierarchy):
    with pytest.raises(ValueError, match="n_max"):
        critical_n(weak_hierarchy, 1.0, 3.0, 1)


def test_critical_kappa_weak_coupling(weak_hierarchy):
    params = weak_hierarchy.replace(n_cavities=4, omega=1.0)
    critical = critical_kappa(params, 3.0, (0.0, 10.0))

    assert critical is not None
    assert 0.0 < critical < 10.0
    below = nonmarkovianity_at(params.replace(kappa=max(critical - 0.05, 0.0)), 3.0)
    above = nonmarkovianity_at(params.replace(kappa=critical + 0.05), 3.0)
    assert (below > ONSET_THRESHOLD) != (above > ONSET_THRESHOLD)


def test_critical_bracket_validation(weak_hierarchy):
    with pytest.raises(ValueError, match="lo < hi"):
        critical_omega(weak_hierarchy, 4, 3.0, (2.0, 1.0))


def test_scan_keeps_value_order(weak_hierarchy):
    rows = scan(weak_hierarchy.replace(n_cavities=4), ScanVariable.OMEGA, [2.0, 0.0, 1.0], 3.0)

    assert [r.omega for r in rows] == [2.0, 0.0, 1.0]
    assert all(r.n == 4 for r in rows)
    assert all(r.kappa == 5.0 for r in rows)
    assert all(r.status == PointStatus.OK for r in rows)


def test_scan_over_n(weak_hierarchy):
    rows = scan(weak_hierarchy, ScanVariable.N, [2, 3, 4], 3.0)

    assert [r.n for r in rows] == [2, 3, 4]
    assert rows[1].nonmarkovianity <= ONSET_THRESHOLD < rows[2].nonmarkovianity
    assert [r.non_markovian for r in rows] == [False, False, True]
    assert [r.speedup for r in rows] == [False, False, True]


def test_evaluate_point_flags_failures(mocker, weak_hierarchy):
    mocker.patch("hqsl.analysis.simulate", side_effect=NormGrowthError("blown up"))
    job = (weak_hierarchy, {"omega": 1.0, "n_cavities": 4}, 3.0, 1e-3, ONSET_THRESHOLD)

    result = evaluate_point(job)

    assert result.status == PointStatus.FAILED
    assert result.omega == 1.0
    assert result.n == 4
    assert math.isnan(result.nonmarkovianity)
    assert math.isnan(result.qsl_ratio)
    assert not result.non_markovian
    assert not result.speedup


def test_evaluate_point_flags_invalid_parameters(weak_hierarchy):
    job = (weak_hierarchy, {"omega": 1.0, "n_cavities": 1}, 3.0, 1e-3, ONSET_THRESHOLD)

    assert evaluate_point(job).status == PointStatus.FAILED


def test_backflow_below_threshold_is_no_speedup(mocker, weak_hierarchy):
    mocker.patch("hqsl.analysis.simulate")
    mocker.patch(
        "hqsl.analysis.measure",
        return_value=MeasureReport(
            tau=3.0,
            nonmarkovianity=9.3e-8,
            qsl_ratio_direct=0.9999986,
            qsl_ratio_relation=0.9999986,
            survival_at_tau=0.07,
            consistency_residual=0.0,
        ),
    )
    job = (weak_hierarchy, {"omega": 1.9, "n_cavities": 5}, 3.0, 1e-3, ONSET_THRESHOLD)

    result = evaluate_point(job)

    assert result.nonmarkovianity == 9.3e-8
    assert result.qsl_ratio == 1.0
    assert result.qsl_ratio_direct == 0.9999986
    assert not result.non_markovian
    assert not result.speedup


def test_sweep_rows_ordered_by_n_then_omega(weak_hierarchy):
    spec = SweepSpec(
        omega_range=(0.0, 1.0, 0.5), n_range=(2, 3), fixed=weak_hierarchy, tau=3.0
    )
    result = sweep(spec)

    assert [(r.n, r.omega) for r in result.rows] == [
        (2, 0.0),
        (2, 0.5),
        (2, 1.0),
        (3, 0.0),
        (3, 0.5),
        (3, 1.0),
    ]
    assert result.metadata.spec == spec


@pytest.mark.parametrize("workers", [2, 4])
def test_sweep_is_deterministic_across_pool_sizes(weak_hierarchy, workers):
    spec = SweepSpec(
        omega_range=(0.0, 3.0, 0.5), n_range=(2, 6), fixed=weak_hierarchy, tau=3.0, dt=1e-2
    )

    sequential = sweep(spec).rows
    parallel = sweep(spec.model_copy(update={"workers": workers})).rows

    assert [r.model_dump() for r in parallel] == [r.model_dump() for r in sequential]


def test_run_jobs_empty():
    assert run_jobs([], workers=4) == []


def test_phase_boundary():
    rows = [
        row(0.0, 4, 0.2),
        row(0.5, 4, 0.01),
        row(1.0, 4, 0.0),
        row(1.5, 4, 0.0),
        row(0.0, 2, 0.0),
        row(0.5, 2, 0.0),
        row(0.0, 6, 0.3),
        row(0.5, 6, 0.2),
        row(1.0, 6, math.nan, PointStatus.FAILED),
    ]

    assert phase_boundary(rows) == {2: None, 4: 0.75, 6: 0.5}
    assert reentrant_lines(rows) == []


def test_phase_boundary_takes_first_transition():
    rows = [
        row(0.0, 8, 0.1),
        row(1.0, 8, 0.0),
        row(2.0, 8, 0.0),
        row(3.0, 8, 1e-5),
        row(0.0, 3, 0.0),
        row(1.0, 3, 1e-4),
        row(2.0, 3, 1e-3),
    ]

    assert phase_boundary(rows) == {3: 0.5, 8: 0.5}
    assert reentrant_lines(rows) == [8]


def test_strong_coupling_stays_below_baseline():
    tau = 3.0
    base = baseline_report(STRONG, tau, 1e-3)
    assert base.nonmarkovianity == pytest.approx(0.7145, abs=1e-3)
    assert base.qsl_ratio_relation == pytest.approx(0.1665, abs=1e-3)

    for n in (2, 4, 8):
        rows = scan(STRONG.replace(n_cavities=n), ScanVariable.OMEGA, [0.0, 1.0, 2.0, 3.0], tau)
        for r in rows:
            assert r.status == PointStatus.OK
            assert r.nonmarkovianity < base.nonmarkovianity
            assert r.qsl_ratio > base.qsl_ratio_relation


def test_strong_coupling_sweep_bounds():
    base = baseline_report(STRONG, 3.0, 1e-3)
    spec = SweepSpec(
        omega_range=(0.0, 5.0, 0.25), n_range=(2, 10), fixed=STRONG, tau=3.0, workers=4
    )

    rows = sweep(spec).rows

    assert len(rows) == 21 * 9
    for r in rows:
        assert r.status == PointStatus.OK
        assert r.nonmarkovianity < base.nonmarkovianity
        assert r.qsl_ratio > base.qsl_ratio_relation


def test_weak_baseline_is_markovian(weak_baseline):
    assert nonmarkovianity_at(weak_baseline, 3.0) == 0.0
    pair = ModelParams(gamma0=5.0, kappa=5.0, gamma=5.0, n_cavities=2)
    assert nonmarkovianity_at(pair, 3.0) <= ONSET_THRESHOLD


def test_weak_phase_diagram(weak_hierarchy):
    spec = SweepSpec(
        omega_range=(0.0, 5.0, 0.05), n_range=(2, 8), fixed=weak_hierarchy, tau=3.0, workers=4
    )

    rows = sweep(spec).rows
    boundary = phase_boundary(rows)

    assert boundary[2] is None
    assert boundary[6] == pytest.approx(2.39, abs=0.1)
    assert boundary[8] == pytest.approx(3.25, abs=0.1)
    assert boundary[6] < boundary[7] < boundary[8]
    assert 8 in reentrant_lines(rows)
    assert 6 not in reentrant_lines(rows)
    for r in rows:
        assert r.status == PointStatus.OK
        assert r.speedup == r.non_markovian
        assert (r.qsl_ratio < 1 - 1e-9) == (r.nonmarkovianity > ONSET_THRESHOLD)
