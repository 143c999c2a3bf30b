"""Device models: exponential loads, PV units, wind turbines and batteries.

All powers and energies are per unit of the network base power (energies in
per-unit hours). The scheduler turns the availability functions here into
ceilings and the loss curves into relaxed quadratic inequalities.
"""
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_nonnegative, check_positive, check_series, frozen
from .exceptions import HorizonMismatchError, InputError
from .network import PhaseIndex


@dataclass(frozen=True, eq=False)
class ExponentialLoad:
    """Load whose power scales as ``(|v| / v_nom) ** alpha``.

    ``s_zip`` is the per-phase series at nominal voltage. With ``phase=None``
    the load is three-phase and ``s_zip`` is split equally over the node's
    phases.
    """

    node: str
    s_zip: np.ndarray
    alpha: float
    phase: PhaseIndex = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "node", str(self.node))
        s = np.asarray(self.s_zip, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(s)):
            raise InputError(f"load {self.name or self.node}: non-finite s_zip")
        object.__setattr__(self, "s_zip", frozen(s))
        alpha = float(self.alpha)
        if not np.isfinite(alpha) or not 0.0 <= alpha <= 2.0:
            raise InputError(f"load {self.name or self.node}: alpha must lie in [0, 2], got {alpha}")
        object.__setattr__(self, "alpha", alpha)
        if self.phase is not None:
            object.__setattr__(self, "phase", PhaseIndex.parse(self.phase))

    @property
    def horizon(self):
        return self.s_zip.size


@dataclass(frozen=True, eq=False)
class PvUnit:
    """PV array behind a converter; ``rho`` is per-unit power per W/m^2."""

    node: str
    rho: float
    s_max: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "node", str(self.node))
        object.__setattr__(self, "rho", check_nonnegative(self.rho, "rho"))
        object.__setattr__(self, "s_max", check_positive(self.s_max, "s_max"))


@dataclass(frozen=True, eq=False)
class WindTurbine:
    node: str
    p_nom: float
    w_nom: float
    w_max: float
    s_max: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "node", str(self.node))
        for attr in ("p_nom", "w_nom", "w_max", "s_max"):
            object.__setattr__(self, attr, check_positive(getattr(self, attr), attr))
        if not self.w_nom < self.w_max:
            raise InputError(f"wind turbine {self.name}: need w_nom < w_max")
        if self.p_nom > self.s_max:
            raise InputError(f"wind turbine {self.name}: p_nom exceeds converter rating")


@dataclass(frozen=True, eq=False)
class Battery:
    """Battery with quadratic converter losses ``a p^2 + b p + c`` per mode."""

    node: str
    e_min: float
    e_max: float
    e_init: float
    loss_char: tuple
    loss_disch: tuple
    p_char_max: float
    p_disch_max: float
    s_max: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "node", str(self.node))
        if not self.e_min <= self.e_init <= self.e_max:
            raise InputError(f"battery {self.name}: need e_min <= e_init <= e_max")
        check_nonnegative(self.e_min, "e_min")
        for attr in ("loss_char", "loss_disch"):
            a, b, c = (float(v) for v in getattr(self, attr))
            if a < 0 or c < 0 or not np.all(np.isfinite([a, b, c])):
                raise InputError(f"battery {self.name}: {attr} needs a >= 0 and c >= 0")
            object.__setattr__(self, attr, (a, b, c))
        for attr in ("p_char_max", "p_disch_max"):
            object.__setattr__(self, attr, check_nonnegative(getattr(self, attr), attr))
        object.__setattr__(self, "s_max", check_positive(self.s_max, "s_max"))


@dataclass(frozen=True, eq=False)
class TimeSeriesSet:
    """Hourly exogenous signals over the scheduling horizon.

    PV availability is given either as irradiance (W/m^2, multiplied by each
    unit's ``rho``) or as a total available-power series in per unit, which
    is shared among PV units in proportion to ``rho``.
    """

    price: np.ndarray
    demand_scale: np.ndarray
    wind_speed: np.ndarray = None
    irradiance: np.ndarray = None
    pv_availability: np.ndarray = None
    dt: float = 1.0

    def __post_init__(self):
        price = np.asarray(self.price, dtype=float).reshape(-1)
        horizon = price.size
        object.__setattr__(self, "price", frozen(check_series(price, horizon, "price", positive=True)))
        object.__setattr__(self, "demand_scale", frozen(check_series(self.demand_scale, horizon, "demand_scale", nonnegative=True)))
        for attr in ("wind_speed", "irradiance", "pv_availability"):
            value = getattr(self, attr)
            if value is None:
                value = np.zeros(horizon) if attr == "wind_speed" else None
            if value is not None:
                value = frozen(check_series(value, horizon, attr, nonnegative=True))
            object.__setattr__(self, attr, value)
        if self.irradiance is not None and self.pv_availability is not None:
            raise InputError("give either irradiance or pv_availability, not both")
        object.__setattr__(self, "dt", check_positive(self.dt, "dt"))

    @property
    def horizon(self):
        return self.price.size

    def truncate(self, horizon):
        if horizon > self.horizon:
            raise HorizonMismatchError(f"requested horizon {horizon} exceeds the {self.horizon} available periods")
        cut = lambda a: None if a is None else a[:horizon]
        return TimeSeriesSet(
            price=cut(self.price),
            demand_scale=cut(self.demand_scale),
            wind_speed=cut(self.wind_speed),
            irradiance=cut(self.irradiance),
            pv_availability=cut(self.pv_availability),
            dt=self.dt,
        )


@dataclass(frozen=True, eq=False)
class DeviceFleet:
    loads: tuple = field(default_factory=tuple)
    pv: tuple = field(default_factory=tuple)
    wind: tuple = field(default_factory=tuple)
    batteries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        for attr in ("loads", "pv", "wind", "batteries"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))

    def check_horizon(self, horizon):
        for load in self.loads:
            if load.horizon != horizon:
                raise HorizonMismatchError(
                    f"load {load.name or load.node} has {load.horizon} periods, expected {horizon}"
                )

    def truncate(self, horizon):
        loads = [
            ExponentialLoad(l.node, l.s_zip[:horizon], l.alpha, l.phase, l.name) for l in self.loads
        ]
        return DeviceFleet(loads, self.pv, self.wind, self.batteries)

    def scale_loads(self, factor):
        loads = [ExponentialLoad(l.node, l.s_zip * factor, l.alpha, l.phase, l.name) for l in self.loads]
        return DeviceFleet(loads, self.pv, self.wind, self.batteries)

    @property
    def is_empty(self):
        return not (self.loads or self.pv or self.wind or self.batteries)


def load_power_exact(load, v, t, v_nom=1.0):
    """Exact exponential-load power at complex voltage ``v`` and period ``t``."""
    return load.s_zip[t] * (np.abs(v) / v_nom) ** load.alpha


def pv_bound(pv, psi_t):
    psi_t = np.asarray(psi_t, dtype=float)
    if np.any(psi_t < 0):
        raise InputError("irradiance must be nonnegative")
    return pv.rho * psi_t


def wind_bound(wt, w_t):
    """Available wind power: cubic up to rated speed, flat to cut-out, zero beyond."""
    w = np.asarray(w_t, dtype=float)
    if np.any(w < 0):
        raise InputError("wind speed must be nonnegative")
    out = np.where(
        w <= wt.w_nom,
        wt.p_nom * (w / wt.w_nom) ** 3,
        np.where(w <= wt.w_max, wt.p_nom, 0.0),
    )
    return float(out) if out.ndim == 0 else out


def battery_loss(bat, p, mode):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise InputError("battery power per mode must be nonnegative")
    if mode == "charge":
        a, b, c = bat.loss_char
    elif mode == "discharge":
        a, b, c = bat.loss_disch
    else:
        raise InputError(f"mode must be 'charge' or 'discharge', got {mode!r}")
    out = a * p**2 + b * p + c
    return float(out) if out.ndim == 0 else out


def pv_availability(fleet, series):
    """Per-unit PV ceilings, shape ``(n_pv, horizon)``."""
    n, horizon = len(fleet.pv), series.horizon
    if n == 0:
        return np.zeros((0, horizon))
    rho = np.array([pv.rho for pv in fleet.pv])
    if series.irradiance is not None:
        psi = series.irradiance
    elif series.pv_availability is not None:
        total = rho.sum()
        psi = series.pv_availability / total if total > 0 else np.zeros(horizon)
    else:
        psi = np.zeros(horizon)
    return np.array([pv_bound(pv, psi) for pv in fleet.pv])


def wind_availability(fleet, series):
    if not fleet.wind:
        return np.zeros((0, series.horizon))
    return np.array([wind_bound(wt, series.wind_speed) for wt in fleet.wind])


@dataclass(frozen=True, eq=False)
class PlacedLoads:
    """Loads flattened to single-phase components on the non-slack vector.

    ``position[i]`` is the non-slack entry of component ``i``; several
    components may share an entry.
    """

    position: np.ndarray
    alpha: np.ndarray
    s_zip: np.ndarray
    size: int

    def aggregate(self, values):
        """Sum per-component values (first axis) onto the non-slack vector."""
        values = np.asarray(values)
        out = np.zeros((self.size,) + values.shape[1:], dtype=values.dtype)
        np.add.at(out, self.position, values)
        return out

    def exact(self, vn, t, v_nom=1.0):
        """Exact load power per non-slack entry at voltages ``vn``."""
        mag = np.abs(vn[self.position]) / v_nom
        return self.aggregate(self.s_zip[:, t] * mag**self.alpha)


def place_loads(net, fleet):
    position, alpha, s_zip = [], [], []
    for load in fleet.loads:
        if load.node == net.slack:
            raise InputError(f"load {load.name or load.node} sits on the slack hypernode")
        if load.node not in net.node_index:
            raise InputError(f"load {load.name} references unknown hypernode {load.node!r}")
        entries = net.entries_of(load.node)
        phases = np.asarray(net.non_slack_phases)[entries]
        if load.phase is None:
            share = load.s_zip / len(entries)
            for e in entries:
                position.append(e)
                alpha.append(load.alpha)
                s_zip.append(share)
        else:
            match = entries[phases == load.phase.value]
            if match.size == 0:
                raise InputError(f"load {load.name} uses phase {load.phase.name} absent at node {load.node}")
            position.append(match[0])
            alpha.append(load.alpha)
            s_zip.append(load.s_zip)
    horizon = fleet.loads[0].horizon if fleet.loads else 0
    return PlacedLoads(
        position=frozen(np.array(position, dtype=int)),
        alpha=frozen(np.array(alpha, dtype=float)),
        s_zip=frozen(np.array(s_zip, dtype=complex).reshape(len(position), horizon)),
        size=len(net.non_slack_index),
    )


def placement_matrix(net, devices):
    """``(n_entries, n_devices)`` matrix spreading each device equally over its node's phases."""
    out = np.zeros((len(net.non_slack_index), len(devices)))
    for k, dev in enumerate(devices):
        if dev.node == net.slack or dev.node not in net.node_index:
            raise InputError(f"device {dev.name or dev.node} must sit on a non-slack hypernode")
        entries = net.entries_of(dev.node)
        out[entries, k] = 1.0 / len(entries)
    return out
