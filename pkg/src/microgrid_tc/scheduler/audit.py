"""Post-solve checks on a ``DispatchSchedule``.

``audit_tightness`` measures how far each relaxed quadratic equality is from
holding with equality. ``check_invariants`` re-verifies the hard
constraints from the trajectories alone. ``verify_against_oracle`` replays
the dispatch through the exact nonlinear power flow.
"""
from dataclasses import dataclass, field

import numpy as np

from ..devices import battery_loss, place_loads, placement_matrix
from ..network import branch_losses, build_admittance, full_voltage, partition, slack_voltage, total_losses
from ..oracle import ExactPowerFlow

TIGHTNESS_TOL = 1e-6
COMPLEMENTARITY_TOL = 1e-6
INVARIANT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class TightnessReport:
    loss_gap: np.ndarray
    grid_gap: np.ndarray
    charge_gap: np.ndarray
    discharge_gap: np.ndarray
    complementarity: np.ndarray
    tol: float = TIGHTNESS_TOL

    @property
    def max_gap(self):
        gaps = [self.loss_gap, self.grid_gap, self.charge_gap, self.discharge_gap]
        return max((float(np.max(np.abs(g))) for g in gaps if g.size), default=0.0)

    @property
    def tight(self):
        return self.max_gap <= self.tol

    @property
    def simultaneous_periods(self):
        """Periods where some battery charges and discharges at once."""
        if not self.complementarity.size:
            return np.zeros(0, dtype=int)
        return np.flatnonzero(np.any(self.complementarity > COMPLEMENTARITY_TOL, axis=1))

    def to_dict(self):
        return {
            "tight": bool(self.tight),
            "max_gap": self.max_gap,
            "tolerance": self.tol,
            "loss_gap": self.loss_gap.tolist(),
            "grid_gap": self.grid_gap.tolist(),
            "charge_gap": self.charge_gap.tolist(),
            "discharge_gap": self.discharge_gap.tolist(),
            "simultaneous_charge_discharge_periods": self.simultaneous_periods.tolist(),
        }


def _injection(schedule, problem):
    """Per-period injection at non-slack entries: devices minus linearized loads."""
    net, fleet = problem.network, problem.fleet
    s = -schedule.load.copy()
    for devices, power in ((fleet.pv, schedule.pv), (fleet.wind, schedule.wind), (fleet.batteries, schedule.battery)):
        if devices:
            s = s + power @ placement_matrix(net, devices).T
    return s


def audit_tightness(schedule, problem, tol=TIGHTNESS_TOL):
    """Gaps of the relaxed loss, grid-power and battery-loss inequalities per period.

    The loss gap compares ``p_loss`` with the branch-by-branch loss computed
    from the solved voltages, so it also exercises the loss factorization.
    """
    net = problem.network
    part = partition(build_admittance(net), net)
    vs = slack_voltage(net.v_nom)
    horizon = schedule.horizon
    exact_loss = np.empty(horizon)
    for t in range(horizon):
        exact_loss[t] = float(np.sum(branch_losses(net, full_voltage(net, vs, schedule.voltages[t]))))
    loss_gap = schedule.p_loss - exact_loss
    inj = _injection(schedule, problem)
    grid_gap = schedule.p_grid - (schedule.p_loss - inj.real.sum(axis=1))
    bats = problem.fleet.batteries
    if bats:
        charge_gap = np.column_stack([
            schedule.n_char[:, k] - battery_loss(b, np.clip(schedule.p_char[:, k], 0, None), "charge")
            for k, b in enumerate(bats)
        ])
        discharge_gap = np.column_stack([
            schedule.n_disch[:, k] - battery_loss(b, np.clip(schedule.p_disch[:, k], 0, None), "discharge")
            for k, b in enumerate(bats)
        ])
        comp = np.clip(schedule.p_char, 0, None) * np.clip(schedule.p_disch, 0, None)
    else:
        charge_gap = discharge_gap = comp = np.zeros((horizon, 0))
    return TightnessReport(loss_gap, grid_gap, charge_gap, discharge_gap, comp, tol)


@dataclass(frozen=True, eq=False)
class InvariantReport:
    violations: dict = field(default_factory=dict)
    tol: float = INVARIANT_TOL

    @property
    def ok(self):
        return all(v <= self.tol for v in self.violations.values())

    @property
    def failed(self):
        return sorted(k for k, v in self.violations.items() if v > self.tol)

    def to_dict(self):
        return {"ok": bool(self.ok), "tolerance": self.tol, "violations": dict(self.violations), "failed": self.failed}


def check_invariants(schedule, problem, tol=INVARIANT_TOL):
    """Largest violation of every hard constraint, recomputed from the trajectories."""
    net, fleet, series = problem.network, problem.fleet, problem.series
    worst = lambda a: float(np.max(a, initial=0.0))
    out = {}
    nominal = net.nominal_voltages()
    out["voltage_band"] = worst(np.abs(schedule.voltages - nominal) - problem.delta * net.v_nom)
    if fleet.pv:
        s_max = np.array([u.s_max for u in fleet.pv])
        out["pv_ceiling"] = worst(schedule.pv.real - schedule.pv_available)
        out["pv_sign"] = worst(-schedule.pv.real)
        out["pv_converter"] = worst(np.abs(schedule.pv) - s_max)
    if fleet.wind:
        s_max = np.array([u.s_max for u in fleet.wind])
        out["wind_ceiling"] = worst(schedule.wind.real - schedule.wind_available)
        out["wind_sign"] = worst(-schedule.wind.real)
        out["wind_converter"] = worst(np.abs(schedule.wind) - s_max)
    bats = fleet.batteries
    if bats:
        attr = lambda name: np.array([getattr(b, name) for b in bats])
        e = schedule.energy
        prev = np.vstack([attr("e_init")[None, :], e[:-1]])
        flow = schedule.p_char - schedule.n_char - schedule.p_disch - schedule.n_disch
        out["energy_balance"] = worst(np.abs(e - prev - series.dt * flow))
        out["soc_bounds"] = worst(np.maximum(attr("e_min") - e, e - attr("e_max")))
        out["battery_power_bounds"] = worst(np.maximum.reduce([
            -schedule.p_char, -schedule.p_disch,
            schedule.p_char - attr("p_char_max"), schedule.p_disch - attr("p_disch_max"),
        ]))
        out["battery_converter"] = worst(np.abs(schedule.battery) - attr("s_max"))
        tight = audit_tightness(schedule, problem)
        out["battery_loss_relaxation"] = worst(-np.concatenate([tight.charge_gap.ravel(), tight.discharge_gap.ravel()]))
    if not problem.surplus_allowed:
        out["no_surplus"] = worst(np.concatenate([-schedule.p_grid, -schedule.slack_power.real, -schedule.slack_power.imag]))
    if problem.reserve_enabled and bats:
        deficit = schedule.load.real.sum(axis=1) - schedule.slack_power.real
        out["static_reserve"] = worst(problem.reserve_tau * deficit - schedule.energy.sum(axis=1))
    return InvariantReport(out, tol)


@dataclass(frozen=True, eq=False)
class OracleReport:
    """Exact power flow replayed at the scheduled device set points.

    ``conservation`` is ``Re(grid) - (loads - generation + losses)`` from the
    exact solution; it vanishes up to the oracle tolerance.
    """

    voltage_error: np.ndarray
    grid_error: np.ndarray
    exact_grid: np.ndarray
    exact_losses: np.ndarray
    conservation: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray

    @property
    def max_voltage_error(self):
        return float(np.max(self.voltage_error, initial=0.0))

    @property
    def max_grid_error(self):
        return float(np.max(self.grid_error, initial=0.0))

    def to_dict(self):
        return {
            "max_voltage_error": self.max_voltage_error,
            "max_grid_error": self.max_grid_error,
            "all_converged": bool(np.all(self.converged)),
            "voltage_error": self.voltage_error.tolist(),
            "grid_error": self.grid_error.tolist(),
            "conservation": self.conservation.tolist(),
            "iterations": self.iterations.tolist(),
        }


def verify_against_oracle(schedule, problem):
    net, fleet = problem.network, problem.fleet
    oracle = ExactPowerFlow().fit(net, fleet)
    gen = _injection(schedule, problem) + schedule.load
    loads = place_loads(net, fleet) if fleet.loads else None
    horizon = schedule.horizon
    v_err, g_err, grid, loss, cons = (np.empty(horizon) for _ in range(5))
    conv = np.zeros(horizon, dtype=bool)
    iters = np.zeros(horizon, dtype=int)
    for t in range(horizon):
        sol = oracle.predict(gen[t], t)
        conv[t], iters[t] = sol.converged, sol.iterations
        g = oracle.grid_power(sol.v)
        grid[t] = g.real
        loss[t] = oracle.losses(sol.v)
        v_err[t] = float(np.max(np.abs(sol.v - schedule.voltages[t]), initial=0.0))
        g_err[t] = abs(g.real - schedule.p_grid[t])
        demand = loads.exact(sol.v, t, net.v_nom).real.sum() if loads is not None else 0.0
        cons[t] = g.real - (demand - gen[t].real.sum() + loss[t])
    return OracleReport(v_err, g_err, grid, loss, cons, conv, iters)
