import numpy as np
import pytest

from gridgw import reference
from gridgw.core import DiscreteMeasure, SolverConfig, UniformGrid1D
from gridgw.errors import DimensionMismatch, NonFiniteCost, NotNormalized, NumericalOverflow
from gridgw.experiments.data import coordinate_cost, random_pair
from gridgw.solvers import compare_modes, entropic_fgw, entropic_gw, plan_discrepancy, sinkhorn


def test_two_by_two_frozen_values():
    # high-precision values of the closed form z / w = exp(1 / eps)
    half = np.full(2, 0.5)
    cost = np.array([[0.0, 1.0], [1.0, 0.0]])
    plan = sinkhorn(cost, half, half, 0.5).values
    np.testing.assert_allclose(plan, [[0.44039853898894122203, 0.05960146101105877797],
                                      [0.05960146101105877797, 0.44039853898894122203]],
                               rtol=0, atol=1e-15)
    plan = sinkhorn(cost, half, half, 0.1).values
    assert abs(plan[0, 1] - 0.000022698934351217197252) < 1e-15
    np.testing.assert_allclose(plan, reference.sinkhorn_2x2(0.1), atol=1e-15)


def test_zero_cost_returns_independent_coupling(rng):
    u, v = random_pair(9, 1)
    plan = sinkhorn(np.zeros((9, 9)), u, v, 0.01).values
    np.testing.assert_allclose(plan, np.outer(u.weights, v.weights), atol=1e-15)


def test_zero_mass_points_get_zero_rows():
    grid = UniformGrid1D(4)
    u = DiscreteMeasure([0.5, 0.0, 0.5, 0.0], grid)
    v = DiscreteMeasure.uniform(grid)
    plan, state = sinkhorn(np.random.default_rng(0).uniform(size=(4, 4)), u, v, 0.1, log=True)
    assert np.all(plan.values[[1, 3]] == 0.0)
    assert state.converged and state.violation <= 1e-9
    assert np.isneginf(state.log_u[1])


def test_log_domain_survives_tiny_epsilon():
    u, v = random_pair(40, 2)
    cost = coordinate_cost(u.grid, v.grid).values ** 2
    plan, state = sinkhorn(cost, u, v, 1e-4, max_iter=100_000, log=True)
    assert state.converged and state.violation <= 1e-9
    assert state.absorptions > 0
    with pytest.raises(NumericalOverflow):
        sinkhorn(cost, u, v, 1e-5, log_domain=False)


def test_warm_start_reaches_same_plan():
    u, v = random_pair(30, 4)
    cost = coordinate_cost(u.grid, v.grid).values
    cold, state = sinkhorn(cost, u, v, 0.01, log=True)
    warm, state2 = sinkhorn(cost, u, v, 0.01, init=state, log=True)
    assert state2.iterations <= 1
    assert plan_discrepancy(cold, warm) < 1e-12


def test_sinkhorn_input_errors():
    half = np.full(2, 0.5)
    with pytest.raises(DimensionMismatch):
        sinkhorn(np.zeros((2, 3)), half, half, 0.1)
    with pytest.raises(NonFiniteCost):
        sinkhorn(np.array([[0, np.inf], [0, 0]]), half, half, 0.1)


def test_gw_fast_and_naive_modes_agree():
    u, v = random_pair(80, 9)
    fast, naive, diff = compare_modes(u, v, config=SolverConfig(epsilon=0.002))
    assert diff <= 1e-12
    assert fast.converged and fast.marginal_violation <= 1e-9
    assert fast.gw_objective == pytest.approx(naive.gw_objective, rel=1e-12)


def test_objective_trace_and_timings():
    u, v = random_pair(50, 3)
    result = entropic_gw(u, v, SolverConfig(epsilon=0.01, outer_iterations=5))
    assert result.iterations_used == 5 == len(result.trace)
    objs = result.trace.objectives
    assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))
    assert set(result.timings) == {"setup_s", "gradient_s", "sinkhorn_s", "solve_s"}


def test_outer_tolerance_stops_early():
    u, v = random_pair(30, 3)
    result = entropic_gw(u, v, SolverConfig(epsilon=0.05, outer_iterations=50, outer_tolerance=1e-10))
    assert result.iterations_used < 50


def test_single_point_problem():
    grid = UniformGrid1D(1)
    m = DiscreteMeasure([1.0], grid)
    result = entropic_gw(m, m)
    assert result.plan.values[0, 0] == pytest.approx(1.0)
    assert result.gw_objective == 0.0


def test_tau_different_from_epsilon_path():
    u, v = random_pair(40, 8)
    base = entropic_gw(u, v, SolverConfig(epsilon=0.01))
    prox = entropic_gw(u, v, SolverConfig(epsilon=0.01, tau=0.02, outer_iterations=30))
    assert prox.converged and prox.marginal_violation <= 1e-9
    # both schemes target the same entropic problem; the proximal one moves more slowly
    assert prox.entropic_objective == pytest.approx(base.entropic_objective, rel=1e-2)
    fast, naive, diff = compare_modes(u, v, config=SolverConfig(epsilon=0.01, tau=0.02))
    assert diff <= 1e-12


def test_solver_validates_measures():
    grid = UniformGrid1D(3)
    bad = DiscreteMeasure([0.3, 0.3, 0.3], grid)
    with pytest.raises(NotNormalized):
        entropic_gw(bad, DiscreteMeasure.uniform(grid))


def test_fgw_endpoints():
    u, v = random_pair(60, 21)
    cost = coordinate_cost(u.grid, v.grid)
    gw = entropic_gw(u, v, SolverConfig(epsilon=0.002))
    fgw1 = entropic_fgw(u, v, cost, SolverConfig(epsilon=0.002, theta=1.0))
    np.testing.assert_array_equal(fgw1.plan.values, gw.plan.values)
    fgw0 = entropic_fgw(u, v, cost, SolverConfig(epsilon=0.002, theta=0.0))
    ot = sinkhorn(cost.values ** 2, u, v, 0.002)
    assert plan_discrepancy(fgw0.plan, ot) <= 1e-12
