import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from microgrid_tc.devices import place_loads
from microgrid_tc.exceptions import InputError
from microgrid_tc.io.synthetic import random_fleet, random_network
from microgrid_tc.network import PHASE_ROTATION, build_admittance, nodal_power, partition, slack_voltage
from microgrid_tc.oracle import ExactPowerFlow
from microgrid_tc.wirtinger import (
    ExpansionPoint,
    LinearPowerFlow,
    build_linear_model,
    linearize_loads,
    linearize_power_flow,
    load_surrogate,
    wirtinger_derivatives,
    wirtinger_residual,
)

from .conftest import constant_power_fleet, two_node


def _random_point(rng, net, spread=0.05):
    n = net.non_slack_index.size
    return net.nominal_voltages() * (1 + spread * (rng.normal(size=n) + 1j * rng.normal(size=n)))


def test_two_node_klu_by_hand():
    y = 1 - 10j
    net = two_node(y)
    part = partition(build_admittance(net), net)
    vs = slack_voltage(1.0)
    k, l, u = linearize_power_flow(part, vs, ExpansionPoint.flat(net))
    v0 = PHASE_ROTATION
    for p in range(3):
        # K = diag(Yns Vs + Ynn V0), L = diag(conj V0) Ynn, U = -conj(V0) (Ynn V0)
        assert k[p, p] == pytest.approx(-y * vs[p] + y * v0[p], abs=1e-12)
        assert l[p, p] == pytest.approx(np.conj(v0[p]) * y, abs=1e-12)
        assert u[p] == pytest.approx(-np.conj(v0[p]) * y * v0[p], abs=1e-12)
    assert np.count_nonzero(k - np.diag(np.diag(k))) == 0
    assert np.count_nonzero(l - np.diag(np.diag(l))) == 0


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 10), spread=st.floats(0.0, 0.1))
def test_power_flow_surrogate_exact_at_expansion_point(seed, n, spread):
    rng = np.random.default_rng(seed)
    net = random_network(rng, n, partial_phase_prob=0.3)
    part = partition(build_admittance(net), net)
    vs = slack_voltage(1.0)
    v0 = _random_point(rng, net, spread)
    model = build_linear_model(net, expansion=v0, part=part)
    exact = nodal_power(part, vs, v0)
    assert np.max(np.abs(model.power(v0) - exact)) <= 1e-10 * max(1.0, np.abs(part.Ynn).max())


@given(alpha=st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0]), v_nom=st.floats(0.5, 2.0), phase=st.integers(0, 2))
def test_load_bracket_is_one_at_nominal(alpha, v_nom, phase):
    m, h, t = linearize_loads([alpha], [phase], v_nom)
    v = v_nom * PHASE_ROTATION[phase]
    assert np.real(m + h * v + t * np.conj(v))[0] == pytest.approx(1.0, abs=1e-12)


def test_load_coefficients_reduce_to_nominal_forms():
    alpha = np.array([0.0, 1.0, 2.0])
    phase = np.array([0, 1, 2])
    m, h, t = linearize_loads(alpha, phase, 1.0)
    np.testing.assert_allclose(m, 1 - alpha)
    np.testing.assert_allclose(h, alpha / (2 * PHASE_ROTATION[phase]))
    np.testing.assert_allclose(t, alpha / (2 * np.conj(PHASE_ROTATION[phase])))


def test_constant_power_surrogate_ignores_voltage():
    m, h, t = linearize_loads([0.0], [0], 1.0)
    for v in (0.9, 1.1j, 0.5 - 0.5j):
        assert load_surrogate(0.3 + 0.1j, m, h, t, v)[0] == 0.3 + 0.1j


def test_alpha_two_bracket_vs_exact():
    m, h, t = linearize_loads([2.0], [0], 1.0)
    bracket = np.real(m + h * 0.98 + t * 0.98)[0]
    assert bracket == pytest.approx(0.96, abs=1e-12)
    assert abs(bracket - 0.98**2) == pytest.approx(4e-4, abs=1e-12)


@given(re=st.floats(-2, 2), im=st.floats(-2, 2), alpha=st.floats(0, 2), phase=st.integers(0, 2))
def test_load_bracket_is_real(re, im, alpha, phase):
    m, h, t = linearize_loads([alpha], [phase], 1.0)
    v = complex(re, im)
    assert abs(np.imag(m + h * v + t * np.conj(v))[0]) <= 1e-12


def test_zero_expansion_point_rejected():
    with pytest.raises(InputError):
        ExpansionPoint([1.0, 0.0])
    with pytest.raises(InputError):
        linearize_loads([1.0], [0], 1.0, v0=[0.0])


def test_residual_is_second_order():
    rng = np.random.default_rng(11)
    net = random_network(rng, 6)
    part = partition(build_admittance(net), net)
    vs = slack_voltage(1.0)
    model = build_linear_model(net, part=part)
    v0 = net.nominal_voltages()
    d = rng.normal(size=v0.size) + 1j * rng.normal(size=v0.size)
    d /= np.max(np.abs(d))
    exact = lambda v: nodal_power(part, vs, v)
    r1 = wirtinger_residual(exact, model.power, v0 + 1e-2 * d)
    r2 = wirtinger_residual(exact, model.power, v0 + 5e-3 * d)
    assert 3.0 <= r1 / r2 <= 5.0
    assert wirtinger_residual(exact, model.power, v0) <= 1e-12


@given(seed=st.integers(0, 2**32 - 1), radius=st.floats(0.005, 0.05))
def test_load_residual_quartering(seed, radius):
    rng = np.random.default_rng(seed)
    alpha, phase = 1.5, int(rng.integers(0, 3))
    m, h, t = linearize_loads([alpha], [phase], 1.0)
    v0 = PHASE_ROTATION[phase]
    d = np.exp(1j * rng.uniform(0, 2 * np.pi))
    exact = lambda v: np.abs(v) ** alpha
    surrogate = lambda v: np.real(m + h * v + t * np.conj(v))
    r1 = wirtinger_residual(exact, surrogate, v0 + radius * d)
    r2 = wirtinger_residual(exact, surrogate, v0 + 0.5 * radius * d)
    if r1 > 1e-12:  # directions tangent to the circle have an even smaller, still quadratic, residual
        assert 3.0 <= r1 / r2 <= 5.0


def test_affine_function_has_zero_residual():
    a, b = 2 - 1j, 0.5 + 3j
    f = lambda v: a * v + b
    assert wirtinger_residual(f, f, np.array([0.3 + 2j, -1.0])) == 0.0


@given(re=st.floats(-2, 2), im=st.floats(-2, 2), re2=st.floats(-2, 2), im2=st.floats(-2, 2))
def test_wirtinger_derivatives_of_product(re, im, re2, im2):
    vk0, vm0 = complex(re, im), complex(re2, im2)
    dvm, _ = wirtinger_derivatives(lambda z: np.conj(vk0) * z, vm0)
    _, dvk_conj = wirtinger_derivatives(lambda z: np.conj(z) * vm0, vk0)
    assert abs(dvm - np.conj(vk0)) <= 1e-6
    assert abs(dvk_conj - vm0) <= 1e-6


def test_surrogate_coefficients_match_finite_differences():
    rng = np.random.default_rng(5)
    net = random_network(rng, 4)
    part = partition(build_admittance(net), net)
    vs = slack_voltage(1.0)
    v0 = _random_point(rng, net, 0.05)
    k, l, _ = linearize_power_flow(part, vs, v0)
    n = v0.size
    for row in range(n):
        for col in range(n):
            def f(z, row=row, col=col):
                v = v0.copy()
                v[col] = z
                return np.conj(nodal_power(part, vs, v)[row])
            dz, dzbar = wirtinger_derivatives(f, v0[col])
            assert abs(dz - l[row, col]) <= 1e-6
            assert abs(dzbar - k[row, col]) <= 1e-6


def test_two_node_affine_solution_close_to_exact():
    net = two_node(1 - 10j)
    fleet = constant_power_fleet(net, "n", 0.1 + 0.05j)
    lpf = LinearPowerFlow().fit(net, fleet)
    exact = ExactPowerFlow().fit(net, fleet).predict()
    assert np.max(np.abs(lpf.predict(np.zeros(3)) - exact.v)) < 1e-3


def test_warm_expansion_is_tighter(cigre):
    flat = LinearPowerFlow().fit(cigre.network, cigre.fleet)
    warm = LinearPowerFlow(expansion="warm", warm_period=19).fit(cigre.network, cigre.fleet)
    exact = ExactPowerFlow().fit(cigre.network, cigre.fleet).predict(t=19)
    zero = np.zeros(exact.v.size)
    e_flat = np.max(np.abs(flat.predict(zero, t=19) - exact.v))
    e_warm = np.max(np.abs(warm.predict(zero, t=19) - exact.v))
    assert e_warm < 1e-8 < e_flat


def test_estimator_api_round_trip():
    lpf = LinearPowerFlow(expansion="warm", warm_period=2)
    assert lpf.get_params() == {"expansion": "warm", "warm_period": 2}
    lpf.set_params(expansion="flat")
    assert lpf.expansion == "flat"
    with pytest.raises(InputError):
        LinearPowerFlow(expansion="bogus").fit(two_node())


@given(seed=st.integers(0, 2**32 - 1), alpha=st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0]))
def test_load_surrogate_exact_at_expansion_point_random(seed, alpha):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 5, partial_phase_prob=0.3)
    fleet = random_fleet(rng, net, 1, alphas=(alpha,))
    v0 = _random_point(rng, net, 0.05)
    model = build_linear_model(net, fleet, v0)
    placed = place_loads(net, fleet)
    bracket = model.load_factor(v0[placed.position])
    exact = (np.abs(v0[placed.position]) / net.v_nom) ** alpha
    assert np.max(np.abs(bracket - exact)) <= 1e-12
