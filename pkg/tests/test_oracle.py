import numpy as np
import pytest

from microgrid_tc.exceptions import BudgetExceededError, InputError
from microgrid_tc.network import PHASE_ROTATION, build_admittance, nodal_power, partition, slack_voltage
from microgrid_tc.oracle import (
    ExactPowerFlow,
    brute_force_dispatch,
    linearization_error_sweep,
    solve_power_flow,
)

from .conftest import constant_power_fleet, tiny_problem, two_node


def two_bus_closed_form(y, s_load, vs=1.0):
    """Receiving-end voltage of a lossy line feeding a constant-power load.

    With ``conj(z) S = V conj(Vs) - |V|^2`` and ``u = |V|^2`` the quadratic
    ``u^2 + (2 Re(conj(z) S) - Vs^2) u + |z S|^2 = 0`` has the high-voltage root.
    """
    z = 1 / y
    w = np.conj(z) * s_load
    b = vs**2 - 2 * w.real
    u = (b + np.sqrt(b**2 - 4 * abs(z * s_load) ** 2)) / 2
    return (w + u) / vs


def test_zero_injection_gives_flat_profile_in_one_iteration():
    net = two_node()
    sol = ExactPowerFlow().fit(net).predict()
    assert sol.converged and sol.iterations == 1
    np.testing.assert_allclose(sol.v, PHASE_ROTATION, atol=1e-12)


def test_two_bus_matches_closed_form():
    y, s = 1 - 10j, 0.1 + 0.05j
    net = two_node(y)
    sol = ExactPowerFlow().fit(net, constant_power_fleet(net, "n", s)).predict()
    assert sol.converged
    expected = two_bus_closed_form(y, s) * PHASE_ROTATION
    assert np.max(np.abs(sol.v - expected)) <= 1e-9


def test_solution_satisfies_nodal_equations(cigre):
    oracle = ExactPowerFlow().fit(cigre.network, cigre.fleet)
    sol = oracle.predict(t=19)
    assert sol.converged and sol.residual <= 1e-8
    s = nodal_power(oracle.partition_, oracle.vs_, sol.v)
    assert np.max(np.abs(s + oracle.loads_.exact(sol.v, 19))) <= 1e-8


def test_cigre_peak_converges_quickly(cigre):
    sol = ExactPowerFlow().fit(cigre.network, cigre.fleet).predict(t=19)
    assert sol.converged and sol.iterations <= 20


def test_divergence_is_reported_not_hidden():
    net = two_node(1 - 10j)
    part = partition(build_admittance(net), net)
    # far beyond the nose of the PV curve
    sol = solve_power_flow(part, slack_voltage(1.0), lambda v: np.full(3, -10.0 + 0j), max_iter=50)
    assert not sol.converged
    with pytest.raises(Exception):
        ExactPowerFlow(max_iter=50).fit(net, constant_power_fleet(net, "n", 10.0)).predict(raise_on_failure=True)


def test_linearization_sweep(cigre):
    rows = linearization_error_sweep(cigre.network, cigre.fleet, [0.0, 0.25, 0.5, 1.0], t=19)
    assert rows[0]["max_error"] <= 1e-12
    errors = [r["max_error"] for r in rows[1:]]
    assert errors == sorted(errors)
    assert errors[0] > 0


def test_brute_force_lossless_arbitrage():
    # stiff line, no load, lossless battery holding exactly one full-power period of sellable energy
    problem = tiny_problem(load=0.0, y=1e4 - 1e4j)
    bat = problem.fleet.batteries[0]
    sellable = bat.e_init - bat.e_min
    res = brute_force_dispatch(problem, step_fraction=0.02)
    assert res.objective == pytest.approx(-2 * sellable * problem.cost_scale, rel=1e-3)
    np.testing.assert_allclose(res.battery_power, [0.0, bat.p_disch_max])


def test_brute_force_refinement_is_stable():
    problem = tiny_problem(loss=(0.04, 0.02, 0.002), e_init=0.9)
    coarse = brute_force_dispatch(problem, step_fraction=0.04)
    fine = brute_force_dispatch(problem, step_fraction=0.02)
    assert fine.objective <= coarse.objective + 1e-12
    assert abs(fine.objective - coarse.objective) < 0.01 * abs(fine.objective)


@pytest.mark.parametrize("e_init", [0.3, 0.6, 1.0])
def test_brute_force_refinement_within_one_step(e_init):
    # when an energy limit binds off-grid the coarse optimum can lag by up to one step
    problem = tiny_problem(loss=(0.04, 0.02, 0.002), e_init=e_init)
    coarse = brute_force_dispatch(problem, step_fraction=0.04)
    fine = brute_force_dispatch(problem, step_fraction=0.02)
    bound = coarse.step * problem.series.price.max() * problem.cost_scale
    assert 0.0 <= coarse.objective - fine.objective <= bound


def test_brute_force_guards():
    problem = tiny_problem()
    with pytest.raises(InputError):
        brute_force_dispatch(problem, step_fraction=0.1)
    with pytest.raises(BudgetExceededError):
        brute_force_dispatch(problem, step_fraction=0.01, max_evaluations=100)


def test_brute_force_rejects_large_instances(cigre):
    from microgrid_tc.scheduler import ScheduleProblem

    with pytest.raises(InputError):
        brute_force_dispatch(ScheduleProblem(cigre.network, cigre.fleet, cigre.series))
