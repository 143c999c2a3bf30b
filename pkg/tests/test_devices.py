import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from microgrid_tc.devices import (
    Battery,
    DeviceFleet,
    ExponentialLoad,
    PvUnit,
    TimeSeriesSet,
    WindTurbine,
    battery_loss,
    load_power_exact,
    pv_availability,
    pv_bound,
    wind_bound,
)
from microgrid_tc.exceptions import HorizonMismatchError, InputError
from microgrid_tc.network import PHASE_ROTATION


def battery(a=0.05, b=0.01, c=0.001):
    return Battery("n", 0.1, 1.0, 0.5, (a, b, c), (a, b, c), 1.0, 1.0, 1.5)


def turbine():
    return WindTurbine("n", p_nom=1.0, w_nom=12.0, w_max=25.0, s_max=1.2)


def test_constant_power_load():
    load = ExponentialLoad("n", [0.3 + 0.1j], 0.0, "A")
    for v in (0.9, 1.05j, 0.7 - 0.2j):
        assert load_power_exact(load, v, 0) == load.s_zip[0]


def test_constant_impedance_load():
    load = ExponentialLoad("n", [0.3 + 0.1j], 2.0, "B")
    v = 0.98 * PHASE_ROTATION[1]
    assert load_power_exact(load, v, 0) == pytest.approx(0.9604 * load.s_zip[0], rel=1e-12)


def test_constant_current_load():
    load = ExponentialLoad("n", [0.3 + 0.1j], 1.0, "A")
    assert load_power_exact(load, 0.95, 0) == pytest.approx(0.95 * load.s_zip[0], rel=1e-12)


@given(alpha=st.floats(0, 2), phase=st.integers(0, 2), v_nom=st.floats(0.5, 2.0))
def test_load_exact_at_nominal(alpha, phase, v_nom):
    load = ExponentialLoad("n", [0.4 - 0.2j], alpha, phase)
    v = v_nom * PHASE_ROTATION[phase]
    assert load_power_exact(load, v, 0, v_nom) == pytest.approx(load.s_zip[0], rel=1e-12)


def test_load_alpha_range():
    with pytest.raises(InputError):
        ExponentialLoad("n", [1.0], 2.5)
    with pytest.raises(InputError):
        ExponentialLoad("n", [1.0], float("nan"))


def test_pv_bound():
    pv = PvUnit("n", rho=3e-4, s_max=0.5)
    assert pv_bound(pv, 0.0) == 0.0
    assert pv_bound(PvUnit("n", 6e-4, 0.5), 800.0) == pytest.approx(2 * pv_bound(pv, 800.0))
    with pytest.raises(InputError):
        pv_bound(pv, -1.0)


def test_cigre_pv_availability_peak(cigre):
    total = pv_availability(cigre.fleet, cigre.series).sum(axis=0) * cigre.network.base_power
    assert total[11] == pytest.approx(150000.0)
    assert np.all(total[:6] == 0)


def test_pv_availability_series_path_matches_irradiance_path():
    units = [PvUnit("a", 2e-4, 1.0), PvUnit("b", 1e-4, 1.0)]
    fleet = DeviceFleet(pv=units)
    psi = np.array([0.0, 500.0, 1000.0])
    by_psi = pv_availability(fleet, TimeSeriesSet([1, 1, 1], [1, 1, 1], irradiance=psi))
    by_total = pv_availability(fleet, TimeSeriesSet([1, 1, 1], [1, 1, 1], pv_availability=3e-4 * psi))
    np.testing.assert_allclose(by_psi, by_total, rtol=1e-12)


def test_wind_bound_branches():
    wt = turbine()
    assert wind_bound(wt, 12.0) == 1.0
    assert wind_bound(wt, 6.0) == pytest.approx(1.0 / 8)
    assert wind_bound(wt, 25.1) == 0.0
    assert wind_bound(wt, 20.0) == 1.0


@given(w1=st.floats(0, 12), w2=st.floats(0, 12))
def test_wind_bound_monotone_below_rated(w1, w2):
    wt = turbine()
    lo, hi = sorted((w1, w2))
    assert wind_bound(wt, lo) <= wind_bound(wt, hi)


def test_wind_bound_continuous_at_rated():
    wt = turbine()
    assert wind_bound(wt, 12.0 - 1e-9) == pytest.approx(wind_bound(wt, 12.0), abs=1e-9)


def test_wind_turbine_validation():
    with pytest.raises(InputError):
        WindTurbine("n", 1.0, 25.0, 12.0, 1.2)
    with pytest.raises(InputError):
        WindTurbine("n", 2.0, 12.0, 25.0, 1.0)


def test_battery_loss_values():
    bat = battery()
    assert battery_loss(bat, 0.0, "charge") == 0.001
    assert battery_loss(bat, 1.0, "discharge") == pytest.approx(0.061)
    with pytest.raises(InputError):
        battery_loss(bat, -0.1, "charge")
    with pytest.raises(InputError):
        battery_loss(bat, 0.1, "idle")


@given(p1=st.floats(0, 1), p2=st.floats(0, 1), a=st.floats(1e-3, 1.0))
def test_battery_loss_convex(p1, p2, a):
    bat = battery(a=a)
    mid = battery_loss(bat, 0.5 * (p1 + p2), "charge")
    assert mid <= 0.5 * (battery_loss(bat, p1, "charge") + battery_loss(bat, p2, "charge")) + 1e-15
    h = 0.1
    second = battery_loss(bat, 0.5 + h, "charge") - 2 * battery_loss(bat, 0.5, "charge") + battery_loss(bat, 0.5 - h, "charge")
    assert second > 0


def test_battery_validation():
    with pytest.raises(InputError):
        Battery("n", 0.5, 1.0, 0.2, (0.1, 0, 0), (0.1, 0, 0), 1, 1, 1)
    with pytest.raises(InputError):
        Battery("n", 0.1, 1.0, 0.2, (-0.1, 0, 0), (0.1, 0, 0), 1, 1, 1)


def test_timeseries_validation():
    with pytest.raises(InputError):
        TimeSeriesSet([0.1, -0.2], [1, 1])
    with pytest.raises(InputError):
        TimeSeriesSet([0.1, 0.2], [1, 1, 1])
    with pytest.raises(HorizonMismatchError):
        TimeSeriesSet([0.1, 0.2], [1, 1]).truncate(3)


def test_fleet_horizon_check():
    fleet = DeviceFleet([ExponentialLoad("n", [1.0, 1.0], 0.0, "A")])
    fleet.check_horizon(2)
    with pytest.raises(HorizonMismatchError):
        fleet.check_horizon(3)
