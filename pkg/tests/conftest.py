import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from microgrid_tc.devices import Battery, DeviceFleet, ExponentialLoad, TimeSeriesSet
from microgrid_tc.io.bundle import bundled_case
from microgrid_tc.network import HyperBranch, ThreePhaseNetwork
from microgrid_tc.scheduler import ScheduleProblem, solve

settings.register_profile("ci", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


def two_node(y=1 - 10j, base_power=100e3):
    """Slack plus one hypernode joined by a decoupled branch ``y * I3``."""
    return ThreePhaseNetwork(["s", "n"], [HyperBranch("s", "n", y * np.eye(3), "s-n")], base_power=base_power)


def constant_power_fleet(net, node, s, horizon=1, alpha=0.0):
    loads = [ExponentialLoad(node, np.full(horizon, s), alpha, ph, f"L:{ph}") for ph in "ABC"]
    return DeviceFleet(loads)


@pytest.fixture(scope="session")
def cigre():
    return bundled_case("cigre")


@pytest.fixture(scope="session")
def cigre_case1(cigre):
    problem = ScheduleProblem.for_case(cigre.network, cigre.fleet, cigre.series, case=1)
    return problem, solve(problem)


@pytest.fixture(scope="session")
def cigre_case2(cigre):
    problem = ScheduleProblem.for_case(cigre.network, cigre.fleet, cigre.series, case=2)
    return problem, solve(problem)


def tiny_problem(loss=(0.0, 0.0, 0.0), prices=(1.0, 2.0), load=0.2 + 0.05j, y=20 - 60j, e_init=0.6, battery=True):
    """Two hypernodes, one battery at the load node (unless disabled), two periods."""
    net = two_node(y)
    horizon = len(prices)
    fleet = constant_power_fleet(net, "n", load / 3, horizon)
    bat = Battery("n", 0.1, 1.0, e_init, loss, loss, 0.5, 0.5, 0.6, "bat")
    fleet = DeviceFleet(fleet.loads, batteries=[bat] if battery else [])
    series = TimeSeriesSet(list(prices), np.ones(horizon))
    return ScheduleProblem(net, fleet, series)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
