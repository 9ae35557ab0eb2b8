import json

import numpy as np
import pytest

from gridgw.core import SolverConfig
from gridgw.errors import ConfigInvalid, NaiveTooLarge, OverlappingHumps
from gridgw.experiments.bench import (
    CSV_COLUMNS,
    BenchRecord,
    BenchReport,
    fit_loglog_slope,
    make_instance,
    run_benchmark,
)
from gridgw.experiments.data import (
    band_mass,
    gen_random_measure,
    gen_two_hump_series,
    hump_transfer,
    random_pair,
)
from gridgw.solvers import entropic_fgw


def test_random_measure_trivial_and_deterministic():
    np.testing.assert_array_equal(gen_random_measure(1, seed=3).weights, [1.0])
    a, b = gen_random_measure(50, seed=7), gen_random_measure(50, seed=7)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert not np.array_equal(a.weights, gen_random_measure(50, seed=8).weights)


def test_random_measure_large():
    m = gen_random_measure(1000, seed=0)
    assert m.weights.min() > 0
    assert abs(m.weights.sum() - 1) <= 1e-12
    assert m.grid.spacing == pytest.approx(1 / 999)


def test_random_measure_2d():
    m = gen_random_measure(5, seed=0, dim=2)
    assert len(m) == 25 and m.grid.side == 5 and m.grid.spacing == 0.25
    u, v = random_pair(5, 1, dim=2)
    assert not np.array_equal(u.weights, v.weights)
    with pytest.raises(ConfigInvalid):
        gen_random_measure(0)


def test_hump_series_rejections():
    with pytest.raises(ConfigInvalid):
        gen_two_hump_series(2)
    with pytest.raises(OverlappingHumps):
        gen_two_hump_series(200, source_positions=(0.4, 0.5))
    with pytest.raises(ConfigInvalid):
        gen_two_hump_series(200, target_positions=(0.02, 0.6))


def test_matching_humps_carry_equal_mass():
    s = gen_two_hump_series(400)
    for src, tgt in zip(s.source_supports, s.target_supports):
        assert s.source.weights[src].sum() == pytest.approx(s.target.weights[tgt].sum(), abs=1e-15)
    assert s.cost.shape == (400, 400)


def test_identical_humps_align_near_diagonal():
    s = gen_two_hump_series(400, target_positions=(0.2, 0.7))
    result = entropic_fgw(s.source, s.target, s.cost, SolverConfig(theta=0.5))
    assert result.converged
    assert band_mass(result.plan, 400 / 20) >= 0.9


def test_noise_is_seeded():
    a = gen_two_hump_series(100, noise=0.05, seed=1)
    b = gen_two_hump_series(100, noise=0.05, seed=1)
    np.testing.assert_array_equal(a.source_signal, b.source_signal)
    np.testing.assert_array_equal(a.cost.values, b.cost.values)


def test_hump_transfer_on_hand_plan():
    s = gen_two_hump_series(100)
    # route everything from hump j straight into hump j
    plan = np.outer(s.source.weights * s.source_supports[0], s.target.weights * s.target_supports[0])
    plan /= plan.sum()
    first, second = hump_transfer(plan, s)
    assert first == pytest.approx(1.0) and np.isnan(second)


@pytest.mark.parametrize("p", [2, 3])
def test_slope_fit_recovers_exponent(p):
    sizes = np.array([250, 500, 1000, 2000])
    times = 3e-9 * sizes ** p * (1 + 0.001 * np.array([1, -1, 1, -1]))
    assert abs(fit_loglog_slope(sizes, times) - p) <= 0.01


def test_slope_fit_needs_two_points():
    with pytest.raises(ConfigInvalid):
        fit_loglog_slope([10], [1.0])


def test_report_slopes_need_three_sizes():
    report = BenchReport("random1d", "gw", [BenchRecord(N=10, time_fast_s=1.0),
                                            BenchRecord(N=20, time_fast_s=4.0)])
    assert report.fit_slopes().fitted_slope_fast is None
    report.records.append(BenchRecord(N=40, time_fast_s=16.0))
    assert report.fit_slopes().fitted_slope_fast == pytest.approx(2.0)


def test_run_benchmark_small():
    report = run_benchmark("random1d", [40, 80, 160], repetitions=2)
    assert [r.N for r in report.records] == [40, 80, 160]
    for r in report.records:
        assert r.plan_diff_fro <= 1e-12
        assert r.speedup == pytest.approx(r.time_naive_s / r.time_fast_s)
    assert report.fitted_slope_fast is not None and report.fitted_slope_naive is not None
    lines = report.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 4
    assert json.loads(report.to_json())["records"][0]["N"] == 40
    assert "fitted slope" in report.table()


def test_run_benchmark_naive_guard():
    report = run_benchmark("random2d", [3, 91], modes=("fast", "naive"), naive_sizes=[3],
                           warmup=False, config=SolverConfig(epsilon=0.05, outer_iterations=1))
    assert report.records[1].time_naive_s is None
    with pytest.raises(NaiveTooLarge):
        run_benchmark("random2d", [91], modes=("naive",), warmup=False)


def test_run_benchmark_rejects_bad_input():
    with pytest.raises(ConfigInvalid):
        run_benchmark("random1d", [80, 40])
    with pytest.raises(ConfigInvalid):
        run_benchmark("random1d", [40], repetitions=0)
    with pytest.raises(ConfigInvalid):
        run_benchmark("nonsense", [40])


@pytest.mark.parametrize("task,metric", [("random1d", "fgw"), ("random2d", "gw"),
                                         ("timeseries", "fgw"), ("digits", "fgw"), ("horse", "fgw")])
def test_make_instance(task, metric):
    size = {"random1d": 30, "random2d": 5, "timeseries": 60, "digits": 28, "horse": 20}[task]
    u, v, cost = make_instance(task, size, seed=0, metric=metric)
    assert len(u) == len(v)
    assert cost is None or cost.shape == (len(u), len(v))
