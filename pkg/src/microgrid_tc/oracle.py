"""Exact reference computations used to validate the convex model.

``solve_power_flow`` is a Z-bus fixed-point iteration on the nonlinear
nodal equations; ``brute_force_dispatch`` enumerates battery schedules on a
grid for tiny instances.
"""
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .devices import place_loads, placement_matrix, pv_availability, wind_availability
from .exceptions import BudgetExceededError, InputError, NotConvergedError
from .network import build_admittance, grid_power, nodal_power, partition, slack_voltage, total_losses
from .wirtinger import build_linear_model


@dataclass(frozen=True, eq=False)
class PowerFlowSolution:
    v: np.ndarray
    iterations: int
    residual: float
    converged: bool


def load_injection(s_fixed, loads, t, v_nom=1.0):
    """Injection evaluator ``S(V) = s_fixed - exact exponential loads``."""
    s_fixed = np.asarray(s_fixed, dtype=complex)

    def evaluate(v):
        if loads is None or loads.position.size == 0:
            return s_fixed
        return s_fixed - loads.exact(v, t, v_nom)

    return evaluate


def solve_power_flow(part, vs, injection, v_start=None, tol=1e-10, mismatch_tol=1e-8, max_iter=100, factor=None):
    """Fixed-point iteration ``V <- Ynn^-1 (conj(S(V) / V) - Yns Vs)``.

    ``injection`` maps the non-slack voltages to the complex power injected
    at each non-slack phase (generation minus load). Returns a
    ``PowerFlowSolution`` with ``converged=False`` instead of a silent
    answer when the iteration stalls.
    """
    vs = np.asarray(vs, dtype=complex)
    lu = factor if factor is not None else lu_factor(part.Ynn)
    slack_current = part.Yns @ vs
    if v_start is None:
        # flat start from the no-load solution
        v = lu_solve(lu, -slack_current)
    else:
        v = np.asarray(v_start, dtype=complex).copy()
    residual = np.inf
    for it in range(1, max_iter + 1):
        s = injection(v)
        v_new = lu_solve(lu, np.conj(s / v) - slack_current)
        step = np.max(np.abs(v_new - v)) if v.size else 0.0
        v = v_new
        if step <= tol:
            residual = _mismatch(part, vs, v, injection)
            if residual <= mismatch_tol:
                return PowerFlowSolution(v, it, residual, True)
    residual = _mismatch(part, vs, v, injection)
    return PowerFlowSolution(v, max_iter, residual, False)


def _mismatch(part, vs, v, injection):
    if v.size == 0:
        return 0.0
    return float(np.max(np.abs(nodal_power(part, vs, v) - injection(v))))


class ExactPowerFlow(BaseEstimator):
    """Nonlinear unbalanced power flow with the admittance factorized once at ``fit``."""

    def __init__(self, tol=1e-10, mismatch_tol=1e-8, max_iter=100):
        self.tol = tol
        self.mismatch_tol = mismatch_tol
        self.max_iter = max_iter

    def fit(self, network, fleet=None):
        self.network_ = network
        self.partition_ = partition(build_admittance(network), network)
        self.vs_ = slack_voltage(network.v_nom)
        self.lu_ = lu_factor(self.partition_.Ynn)
        self.loads_ = place_loads(network, fleet) if fleet is not None and fleet.loads else None
        return self

    def predict(self, s_fixed=None, t=0, raise_on_failure=False):
        check_is_fitted(self, "lu_")
        n = self.partition_.Ynn.shape[0]
        s_fixed = np.zeros(n, dtype=complex) if s_fixed is None else np.asarray(s_fixed, dtype=complex)
        sol = solve_power_flow(
            self.partition_,
            self.vs_,
            load_injection(s_fixed, self.loads_, t, self.network_.v_nom),
            tol=self.tol,
            mismatch_tol=self.mismatch_tol,
            max_iter=self.max_iter,
            factor=self.lu_,
        )
        if raise_on_failure and not sol.converged:
            raise NotConvergedError(f"power flow did not converge at t={t} (residual {sol.residual:.3e})")
        return sol

    def grid_power(self, v):
        return grid_power(self.partition_, self.vs_, v)

    def losses(self, v):
        return total_losses(self.partition_, self.vs_, v)


def linearization_error_sweep(network, fleet, scales, t=0):
    """Max ``|V_linear - V_exact|`` for the loads at period ``t`` scaled by each factor."""
    rows = []
    for scale in scales:
        scaled = fleet.scale_loads(scale)
        exact = ExactPowerFlow().fit(network, scaled)
        sol = exact.predict(t=t)
        if not sol.converged:
            raise NotConvergedError(f"oracle diverged at load scale {scale}")
        model = build_linear_model(network, scaled, part=exact.partition_)
        loads = exact.loads_
        v_lin = model.solve(np.zeros(sol.v.size), loads, t)
        rows.append({"scale": float(scale), "max_error": float(np.max(np.abs(v_lin - sol.v))), "iterations": sol.iterations})
    return rows


@dataclass(frozen=True, eq=False)
class BruteForceResult:
    objective: float
    battery_power: np.ndarray
    energy: np.ndarray
    grid_power: np.ndarray
    evaluations: int
    step: float


def brute_force_dispatch(problem, step_fraction=0.05, max_evaluations=10_000_000):
    """Exhaustive search over battery injection sequences for tiny instances.

    Supports at most 2 hypernodes, 1 battery and 4 periods. Renewable units
    inject their full availability with zero reactive power, batteries
    exchange active power only. Each candidate injection level is evaluated
    once per period with the exact power flow; sequences are then enumerated
    on the resulting table. The objective is ``sum_t c_t Re(grid_power_t) dt``
    in the same currency units as the convex program.
    """
    net, fleet, series = problem.network, problem.fleet, problem.series
    if net.n_nodes > 2 or len(fleet.batteries) > 1 or series.horizon > 4:
        raise InputError("brute force is limited to 2 hypernodes, 1 battery and 4 periods")
    if step_fraction > 0.05 or step_fraction <= 0:
        raise InputError("step_fraction must lie in (0, 0.05]")
    horizon, dt = series.horizon, series.dt
    exact = ExactPowerFlow().fit(net, fleet)
    n = exact.partition_.Ynn.shape[0]
    renewable = np.zeros((n, horizon), dtype=complex)
    if fleet.pv:
        renewable += placement_matrix(net, fleet.pv) @ pv_availability(fleet, series)
    if fleet.wind:
        renewable += placement_matrix(net, fleet.wind) @ wind_availability(fleet, series)

    if fleet.batteries:
        bat = fleet.batteries[0]
        p_max = max(bat.p_char_max, bat.p_disch_max)
        step = step_fraction * p_max
        n_down = int(np.floor(bat.p_char_max / step + 1e-9))
        n_up = int(np.floor(bat.p_disch_max / step + 1e-9))
        levels = step * np.arange(-n_down, n_up + 1)
        levels = levels[np.abs(levels) <= bat.s_max + 1e-12]
        spread = placement_matrix(net, [bat])[:, 0]
    else:
        bat, step, levels, spread = None, 0.0, np.zeros(1), np.zeros(n)

    n_eval = len(levels) ** horizon
    if n_eval > max_evaluations:
        raise BudgetExceededError(f"{n_eval} sequences exceed the budget of {max_evaluations}")

    cost_scale = problem.cost_scale
    period_cost = np.full((horizon, len(levels)), np.inf)
    period_grid = np.full((horizon, len(levels)), np.nan)
    for t in range(horizon):
        for j, p in enumerate(levels):
            sol = exact.predict(renewable[:, t] + p * spread, t)
            if not sol.converged:
                continue
            dev = np.abs(sol.v - net.nominal_voltages())
            if np.any(dev > problem.delta * net.v_nom + 1e-9):
                continue
            g = exact.grid_power(sol.v)
            if not problem.surplus_allowed and (g.real < 0 or g.imag < 0):
                continue
            period_grid[t, j] = g.real
            period_cost[t, j] = series.price[t] * g.real * cost_scale

    combos = np.array(list(itertools.product(range(len(levels)), repeat=horizon)), dtype=int)
    p_seq = levels[combos]
    if bat is not None:
        p_char = np.clip(-p_seq, 0, None)
        p_disch = np.clip(p_seq, 0, None)
        ac, bc, cc = bat.loss_char
        ad, bd, cd = bat.loss_disch
        n_char = ac * p_char**2 + bc * p_char + cc
        n_disch = ad * p_disch**2 + bd * p_disch + cd
        energy = bat.e_init + np.cumsum((p_char - n_char - p_disch - n_disch) * dt, axis=1)
        feasible = np.all((energy >= bat.e_min - 1e-12) & (energy <= bat.e_max + 1e-12), axis=1)
    else:
        energy = np.zeros((len(combos), horizon))
        feasible = np.ones(len(combos), dtype=bool)
    cost = period_cost[np.arange(horizon)[None, :], combos].sum(axis=1)
    cost[~feasible] = np.inf
    best = int(np.argmin(cost))
    if not np.isfinite(cost[best]):
        raise InputError("no feasible schedule on the brute-force grid")
    return BruteForceResult(
        objective=float(cost[best]),
        battery_power=p_seq[best],
        energy=energy[best],
        grid_power=period_grid[np.arange(horizon), combos[best]],
        evaluations=int(n_eval),
        step=float(step),
    )
