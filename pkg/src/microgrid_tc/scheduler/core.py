"""Assembly and solution of the convex day-ahead dispatch program.

Decision variables per period ``t`` (all per unit):

* ``vr, vi``: real and imaginary non-slack voltages
* ``pv_p, pv_q, wind_p, wind_q``: renewable converter set points
* ``p_char, p_disch, n_char, n_disch, e, bat_q``: battery powers, losses, energy
* ``p_grid, p_loss``: power bought from the main grid and network losses

Quadratic equalities are relaxed to ``>=`` and left to the objective to
tighten; the audits in ``scheduler.audit`` measure how tight they end up.
"""
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from ..devices import place_loads, placement_matrix, pv_availability, wind_availability
from ..exceptions import (
    ConfigurationError,
    HorizonMismatchError,
    InaccurateSolutionWarning,
    InaccurateSolveError,
    InfeasibleError,
    SolverFailure,
    UnboundedError,
)
from ..network import PHASE_ANGLES, branch_loss_factors, build_admittance, partition, slack_voltage
from ..wirtinger import LinearFlowModel, build_linear_model
from .adapters import CAPABILITIES, CvxpyAdapter
from .program import ProgramBuilder

PRIMAL_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class ScheduleProblem:
    network: object
    fleet: object
    series: object
    linear_model: LinearFlowModel = None
    delta: float = 0.1
    surplus_allowed: bool = True
    reserve_tau: float = None

    def __post_init__(self):
        if not 0.0 < self.delta <= 0.2:
            raise ConfigurationError(f"delta must lie in (0, 0.2], got {self.delta}")
        self.fleet.check_horizon(self.series.horizon)
        if self.reserve_tau is not None:
            if self.reserve_tau <= 0:
                raise ConfigurationError("reserve duration must be positive")
            if not self.fleet.batteries:
                raise ConfigurationError("static reserve needs at least one battery")
        if self.linear_model is None:
            object.__setattr__(self, "linear_model", build_linear_model(self.network, self.fleet))
        elif self.linear_model.size != len(self.network.non_slack_index):
            raise ConfigurationError("linear model does not match the network")

    @property
    def horizon(self):
        return self.series.horizon

    @property
    def reserve_enabled(self):
        return self.reserve_tau is not None

    @property
    def cost_scale(self):
        """Currency per (per-unit power x price unit): ``dt * base_power / 1000`` for $/kWh prices."""
        return self.series.dt * self.network.base_power / 1000.0

    @classmethod
    def for_case(cls, network, fleet, series, case=1, **kwargs):
        if case not in (1, 2):
            raise ConfigurationError(f"case must be 1 or 2, got {case}")
        return cls(network, fleet, series, surplus_allowed=(case == 1), **kwargs)


def add_static_reserve(problem, tau=1.0):
    """Return ``problem`` with the static-reserve constraint enabled for duration ``tau`` hours."""
    return replace(problem, reserve_tau=tau)


@dataclass(frozen=True, eq=False)
class _Context:
    """Constant data shared by assembly, extraction and audits."""

    part: object
    vs: np.ndarray
    loads: object
    place_pv: np.ndarray
    place_wind: np.ndarray
    place_bat: np.ndarray
    pv_avail: np.ndarray
    wind_avail: np.ndarray


def _context(problem):
    net, fleet, series = problem.network, problem.fleet, problem.series
    part = partition(build_admittance(net), net)
    n = len(net.non_slack_index)
    empty = np.zeros((n, 0))
    return _Context(
        part=part,
        vs=slack_voltage(net.v_nom),
        loads=place_loads(net, fleet),
        place_pv=placement_matrix(net, fleet.pv) if fleet.pv else empty,
        place_wind=placement_matrix(net, fleet.wind) if fleet.wind else empty,
        place_bat=placement_matrix(net, fleet.batteries) if fleet.batteries else empty,
        pv_avail=pv_availability(fleet, series).T,
        wind_avail=wind_availability(fleet, series).T,
    )


def _csr(a, tol=0.0):
    a = np.asarray(a, dtype=float)
    if tol:
        a = np.where(np.abs(a) > tol, a, 0.0)
    return sp.csr_matrix(a)


def _branch_drop_operator(net, vs):
    """Complex ``(W, w)`` with ``[R_l (V_from - V_to)]_l = W V_N + w``."""
    n = net.n_nodes
    col = {int(k): j for j, k in enumerate(net.non_slack_index)}
    factors = branch_loss_factors(net)
    rows = 3 * len(net.branches)
    d = np.zeros((rows, len(col)), dtype=complex)
    d0 = np.zeros(rows, dtype=complex)
    for b, (br, r) in enumerate(zip(net.branches, factors)):
        i, j = net.node_index[br.from_node], net.node_index[br.to_node]
        sel = np.zeros((3, len(col)), dtype=complex)
        const = np.zeros(3, dtype=complex)
        for p in range(3):
            for node, sign in ((i, 1.0), (j, -1.0)):
                full = p * n + node
                if node == 0:
                    const[p] += sign * vs[p]
                elif full in col:
                    sel[p, col[full]] += sign
        d[3 * b:3 * b + 3] = r @ sel
        d0[3 * b:3 * b + 3] = r @ const
    return d, d0


def assemble(problem):
    """Build the canonical conic program for ``problem``."""
    net, fleet, series, lm = problem.network, problem.fleet, problem.series, problem.linear_model
    horizon = series.horizon
    if lm is None:
        raise ConfigurationError("missing linear model / expansion point")
    fleet.check_horizon(horizon)
    ctx = _context(problem)
    n = len(net.non_slack_index)
    npv, nw, nb = len(fleet.pv), len(fleet.wind), len(fleet.batteries)
    if ctx.pv_avail.shape[0] != horizon or ctx.wind_avail.shape[0] != horizon:
        raise HorizonMismatchError("availability series do not match the horizon")

    b = ProgramBuilder()
    for name, width in (("vr", n), ("vi", n), ("pv_p", npv), ("pv_q", npv), ("wind_p", nw), ("wind_q", nw),
                        ("p_char", nb), ("p_disch", nb), ("n_char", nb), ("n_disch", nb), ("e", nb), ("bat_q", nb)):
        b.variable(name, (horizon, width))
    b.variable("p_grid", horizon)
    b.variable("p_loss", horizon)

    # affine power-flow surrogate, split into real and imaginary rows
    kl = lm.K + lm.L
    lk = lm.L - lm.K
    flow_p = sp.hstack([_csr(kl.real), _csr(-lk.imag)], format="csr")
    flow_q = sp.hstack([_csr(kl.imag), _csr(lk.real)], format="csr")

    loads = ctx.loads
    ncomp = loads.position.size
    agg = sp.csr_matrix((np.ones(ncomp), (loads.position, np.arange(ncomp))), shape=(n, ncomp))
    fac_x = sp.csr_matrix((2 * lm.H.real, (np.arange(ncomp), loads.position)), shape=(ncomp, n))
    fac_y = sp.csr_matrix((-2 * lm.H.imag, (np.arange(ncomp), loads.position)), shape=(ncomp, n))

    w, w0 = _branch_drop_operator(net, ctx.vs)
    loss_x = sp.vstack([_csr(w.real), _csr(w.imag)], format="csr")
    loss_y = sp.vstack([_csr(-w.imag), _csr(w.real)], format="csr")
    loss_c = np.concatenate([w0.real, w0.imag])

    slack_row = ctx.vs @ np.conj(ctx.part.Ysn)
    slack_const = np.sum(ctx.vs * np.conj(ctx.part.Yss @ ctx.vs))

    bat = fleet.batteries
    loss_rows, loss_owner = [], []
    for t in range(horizon):
        x, y = b.var("vr", t), b.var("vi", t)
        xy = type(x).vstack([x, y])
        factor = (fac_x @ x) + (fac_y @ y) + lm.M
        load_p = agg @ (loads.s_zip[:, t].real * factor) if ncomp else b.constant(np.zeros(n))
        load_q = agg @ (loads.s_zip[:, t].imag * factor) if ncomp else b.constant(np.zeros(n))
        inj_p = -load_p
        inj_q = -load_q
        if npv:
            inj_p = inj_p + ctx.place_pv @ b.var("pv_p", t)
            inj_q = inj_q + ctx.place_pv @ b.var("pv_q", t)
        if nw:
            inj_p = inj_p + ctx.place_wind @ b.var("wind_p", t)
            inj_q = inj_q + ctx.place_wind @ b.var("wind_q", t)
        if nb:
            inj_p = inj_p + ctx.place_bat @ (b.var("p_disch", t) - b.var("p_char", t))
            inj_q = inj_q + ctx.place_bat @ b.var("bat_q", t)
        b.equal(flow_p @ xy + lm.U.real - inj_p, "power_flow_real")
        b.equal(flow_q @ xy + lm.U.imag + inj_q, "power_flow_imag")

        p_grid, p_loss = b.var("p_grid", t), b.var("p_loss", t)
        loss_rows.append(loss_x @ x + loss_y @ y + loss_c)
        loss_owner.append(np.full(loss_c.size, t))
        b.less_equal(p_loss - inj_p.sum() - p_grid, "grid_power")

        slack_p = (slack_row.real[None, :] @ x) + (slack_row.imag[None, :] @ y) + slack_const.real
        slack_q = (slack_row.imag[None, :] @ x) - (slack_row.real[None, :] @ y) + slack_const.imag
        if not problem.surplus_allowed:
            b.less_equal(-p_grid, "surplus_grid_variable")
            b.less_equal(-slack_p, "surplus_real")
            b.less_equal(-slack_q, "surplus_imag")
        if problem.reserve_enabled:
            deficit = load_p.sum() - slack_p
            b.less_equal(problem.reserve_tau * deficit - b.var("e", t).sum(), "static_reserve")

        dev = [x - net.v_nom * np.cos(PHASE_ANGLES[net.non_slack_phases]),
               y - net.v_nom * np.sin(PHASE_ANGLES[net.non_slack_phases])]
        b.cone(dev, b.constant(np.full(n, problem.delta * net.v_nom)), "voltage")

    b.quadratic(type(x).vstack(loss_rows), b.var("p_loss"), np.concatenate(loss_owner), "power_loss")

    # availability ceilings and sign bounds, all periods at once
    if npv:
        b.less_equal(-b.var("pv_p"), "pv_nonnegative")
        b.less_equal(b.var("pv_p") - ctx.pv_avail.reshape(-1), "pv_ceiling")
        b.cone([b.var("pv_p"), b.var("pv_q")], b.constant(np.tile([u.s_max for u in fleet.pv], horizon)), "pv_converter")
    if nw:
        b.less_equal(-b.var("wind_p"), "wind_nonnegative")
        b.less_equal(b.var("wind_p") - ctx.wind_avail.reshape(-1), "wind_ceiling")
        b.cone([b.var("wind_p"), b.var("wind_q")], b.constant(np.tile([u.s_max for u in fleet.wind], horizon)), "wind_converter")
    if nb:
        tile = lambda attr: np.tile([getattr(u, attr) for u in bat], horizon)
        pc, pd = b.var("p_char"), b.var("p_disch")
        nc, nd, e = b.var("n_char"), b.var("n_disch"), b.var("e")
        b.less_equal(-pc, "battery_bounds")
        b.less_equal(-pd, "battery_bounds")
        b.less_equal(pc - tile("p_char_max"), "battery_bounds")
        b.less_equal(pd - tile("p_disch_max"), "battery_bounds")
        b.less_equal(tile("e_min") - e, "soc_bounds")
        b.less_equal(e - tile("e_max"), "soc_bounds")
        coef = lambda attr, k: np.tile([getattr(u, attr)[k] for u in bat], horizon)
        b.quadratic(np.sqrt(coef("loss_char", 0)) * pc, nc - coef("loss_char", 1) * pc - coef("loss_char", 2), label="battery_charge_loss")
        b.quadratic(np.sqrt(coef("loss_disch", 0)) * pd, nd - coef("loss_disch", 1) * pd - coef("loss_disch", 2), label="battery_discharge_loss")
        b.cone([pd - pc, b.var("bat_q")], b.constant(tile("s_max")), "battery_converter")
        e_init = np.array([u.e_init for u in bat])
        for t in range(horizon):
            prev = b.var("e", t - 1) if t else b.constant(e_init)
            net_power = b.var("p_char", t) - b.var("n_char", t) - b.var("p_disch", t) - b.var("n_disch", t)
            b.equal(b.var("e", t) - prev - series.dt * net_power, "energy_balance")

    b.minimize((series.price * problem.cost_scale)[None, :] @ b.var("p_grid"))
    return b.build()


@dataclass(frozen=True, eq=False)
class DispatchSchedule:
    """Solved trajectories, time-major: first axis is the period.

    All powers and energies are per unit of the network base power.
    ``slack_power`` is the slack-bus injection evaluated from the solved
    voltages; ``load`` is the linearized load per non-slack entry.
    """

    voltages: np.ndarray
    pv: np.ndarray
    wind: np.ndarray
    battery: np.ndarray
    p_char: np.ndarray
    p_disch: np.ndarray
    n_char: np.ndarray
    n_disch: np.ndarray
    energy: np.ndarray
    p_grid: np.ndarray
    p_loss: np.ndarray
    slack_power: np.ndarray
    load: np.ndarray
    pv_available: np.ndarray
    wind_available: np.ndarray
    price: np.ndarray
    objective: float
    status: str
    iterations: int
    wall_time: float
    solver: str
    max_residual: float
    counts: dict = field(default_factory=dict)

    @property
    def horizon(self):
        return self.p_grid.size


def _extract(program, x, problem, ctx, result):
    lm = problem.linear_model
    horizon = problem.horizon
    g = lambda name: program.extract(x, name)
    v = g("vr") + 1j * g("vi")
    loads = ctx.loads
    load = np.zeros_like(v)
    for t in range(horizon):
        if loads.position.size:
            factor = lm.load_factor(v[t, loads.position])
            load[t] = loads.aggregate(loads.s_zip[:, t] * factor)
    slack = np.array([np.sum(ctx.vs * np.conj(ctx.part.Yss @ ctx.vs + ctx.part.Ysn @ v[t])) for t in range(horizon)])
    return DispatchSchedule(
        voltages=v,
        pv=g("pv_p") + 1j * g("pv_q"),
        wind=g("wind_p") + 1j * g("wind_q"),
        battery=(g("p_disch") - g("p_char")) + 1j * g("bat_q"),
        p_char=g("p_char"),
        p_disch=g("p_disch"),
        n_char=g("n_char"),
        n_disch=g("n_disch"),
        energy=g("e"),
        p_grid=g("p_grid"),
        p_loss=g("p_loss"),
        slack_power=slack,
        load=load,
        pv_available=ctx.pv_avail,
        wind_available=ctx.wind_avail,
        price=np.asarray(problem.series.price),
        objective=float(result.objective),
        status="optimal",
        iterations=result.iterations,
        wall_time=result.wall_time,
        solver=result.solver,
        max_residual=program.max_residual(x),
        counts=program.counts(),
    )


def solve(problem, adapter=None, program=None):
    """Assemble (unless ``program`` is given), solve and extract a ``DispatchSchedule``.

    Raises ``InfeasibleError``, ``UnboundedError``, ``SolverFailure`` or
    ``InaccurateSolveError``; the last one also emits an
    ``InaccurateSolutionWarning``.
    """
    adapter = adapter if adapter is not None else CvxpyAdapter("CLARABEL")
    missing = CAPABILITIES - set(adapter.capabilities)
    if missing:
        raise SolverFailure(f"adapter {adapter.name} lacks {sorted(missing)}", status="unsupported")
    program = program if program is not None else assemble(problem)
    result = adapter.solve(program)
    if result.status == "infeasible":
        raise InfeasibleError(f"{result.solver}: problem is infeasible", result.status, result)
    if result.status == "unbounded":
        raise UnboundedError(f"{result.solver}: problem is unbounded", result.status, result)
    if result.status == "failure" or not np.all(np.isfinite(result.x)):
        raise SolverFailure(f"{result.solver}: {result.raw_status} {result.message}".strip(), result.status, result)
    residual = program.max_residual(result.x)
    if result.status == "inaccurate" or residual > PRIMAL_TOL:
        result.status = "inaccurate"
        msg = f"{result.solver}: solution inaccurate (scaled primal residual {residual:.2e})"
        warnings.warn(msg, InaccurateSolutionWarning, stacklevel=2)
        raise InaccurateSolveError(msg, "inaccurate", result)
    return _extract(program, result.x, problem, _context(problem), result)
