"""Case bundles: a directory with ``case.json``, ``network.json``,
``devices.json`` and ``timeseries.csv``.

Every physical quantity in the files carries a unit. Everything is converted
to per unit of the network base power at load time; ``write_bundle`` emits
per-unit files that load back to an equal bundle.
"""
import csv
import io
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..devices import Battery, DeviceFleet, ExponentialLoad, PvUnit, TimeSeriesSet, WindTurbine
from ..exceptions import (
    BundleHorizonError,
    DanglingReferenceError,
    InputError,
    MicrogridError,
    SchemaError,
)
from ..network import PHASES, HyperBranch, ThreePhaseNetwork

_POWER = {"W": 1.0, "kW": 1e3, "MW": 1e6, "VA": 1.0, "kVA": 1e3, "var": 1.0, "kvar": 1e3}
_ENERGY = {"Wh": 1.0, "kWh": 1e3, "MWh": 1e6}
_PRICE = {"$/kWh": 1.0, "$/MWh": 1e-3}


@dataclass(frozen=True)
class CaseOptions:
    case: int = 1
    delta: float = 0.1
    reserve_tau: float = None
    horizon: int = None
    dt: float = 1.0


@dataclass(frozen=True, eq=False)
class CaseBundle:
    name: str
    network: ThreePhaseNetwork
    fleet: DeviceFleet
    series: TimeSeriesSet
    options: CaseOptions = field(default_factory=CaseOptions)
    provenance: dict = field(default_factory=dict)

    def with_options(self, **changes):
        """Copy with scenario options replaced; ``horizon`` truncates the data."""
        opts = {k: v for k, v in changes.items() if v is not None}
        merged = CaseOptions(**{**self.options.__dict__, **opts})
        series, fleet = self.series, self.fleet
        if merged.dt != series.dt:
            series = TimeSeriesSet(series.price, series.demand_scale, series.wind_speed, series.irradiance,
                                   series.pv_availability, merged.dt)
        if merged.horizon is not None and merged.horizon != series.horizon:
            if merged.horizon < 1:
                raise BundleHorizonError(f"horizon must be positive, got {merged.horizon}")
            if merged.horizon > series.horizon:
                raise BundleHorizonError(f"horizon {merged.horizon} exceeds the {series.horizon} periods on file")
            series, fleet = series.truncate(merged.horizon), fleet.truncate(merged.horizon)
        return CaseBundle(self.name, self.network, fleet, series, merged, self.provenance)


class _Reader:
    """Field access with path-qualified schema errors."""

    def __init__(self, data, where):
        self.data = data
        self.where = where

    def _fail(self, key, message):
        raise SchemaError(message, f"{self.where}.{key}" if key is not None else self.where)

    def child(self, key):
        return _Reader(self.get(key), f"{self.where}.{key}")

    def items(self, key, required=False):
        value = self.data.get(key, None) if isinstance(self.data, dict) else None
        if value is None:
            if required:
                self._fail(key, "missing list")
            return []
        if not isinstance(value, list):
            self._fail(key, "expected a list")
        return [_Reader(v, f"{self.where}.{key}[{i}]") for i, v in enumerate(value)]

    def get(self, key, default=...):
        if not isinstance(self.data, dict):
            raise SchemaError("expected an object", self.where)
        if key not in self.data:
            if default is ...:
                self._fail(key, "missing field")
            return default
        return self.data[key]

    def number(self, key, default=...):
        value = self.get(key, default)
        if value is None and default is None:
            return None
        try:
            value = float(value)
        except (TypeError, ValueError):
            self._fail(key, f"expected a number, got {value!r}")
        if not np.isfinite(value):
            self._fail(key, "must be finite")
        return value

    def quantity(self, key, table, base, default=...):
        """Read ``{"value": x, "unit": u}`` and convert to per unit of ``base``."""
        raw = self.get(key, default)
        if raw is default and default is not ...:
            return default
        if not isinstance(raw, dict) or "value" not in raw or "unit" not in raw:
            self._fail(key, "expected {\"value\": ..., \"unit\": ...}")
        sub = _Reader(raw, f"{self.where}.{key}")
        value = sub.number("value")
        unit = str(raw["unit"])
        if unit in ("pu", "pu*h"):
            return value
        if unit not in table:
            sub._fail("unit", f"unsupported unit {unit!r}; expected one of {sorted(table) + ['pu']}")
        return value * table[unit] / base


def _load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read file ({exc.strerror})", str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, f"{Path(path).name}:{exc.lineno}:{exc.colno}") from None


def parse_network(data, where="network.json"):
    r = _Reader(data, where)
    base_power = r.quantity("base_power", _POWER, 1.0)
    base_voltage = r.quantity("base_voltage", {"V": 1.0, "kV": 1e3}, 1.0)
    v_nom = r.quantity("v_nom", {}, 1.0, default=1.0)
    slack = str(r.get("slack"))
    nodes = r.items("nodes", required=True)
    ids, phases = [], {}
    for nd in nodes:
        nid = str(nd.get("id"))
        ph = str(nd.get("phases", PHASES)).upper()
        if not ph or any(c not in PHASES for c in ph):
            nd._fail("phases", f"invalid phase set {ph!r}")
        ids.append(nid)
        if ph != PHASES:
            phases[nid] = ph
    if slack not in ids:
        raise DanglingReferenceError(f"{where}.slack: hypernode {slack!r} is not listed")
    ids.remove(slack)
    ids.insert(0, slack)
    known = set(ids)
    branches = []
    for br in r.items("branches", required=True):
        ends = [str(br.get("from")), str(br.get("to"))]
        for end in ends:
            if end not in known:
                raise DanglingReferenceError(f"{br.where}: unknown hypernode {end!r}")
        adm = br.child("admittance")
        unit = adm.get("unit")
        if unit != "pu":
            adm._fail("unit", f"admittance must be given in pu, got {unit!r}")
        try:
            y = np.asarray(adm.get("real"), dtype=float) + 1j * np.asarray(adm.get("imag", np.zeros((3, 3))), dtype=float)
        except (TypeError, ValueError):
            raise SchemaError("admittance entries must be numbers", adm.where) from None
        if y.shape != (3, 3):
            raise SchemaError(f"admittance must be 3x3, got shape {y.shape}", adm.where)
        branches.append(HyperBranch(ends[0], ends[1], y, str(br.get("id", f"{ends[0]}-{ends[1]}"))))
    try:
        return ThreePhaseNetwork(ids, branches, base_power, base_voltage, v_nom, phases, str(r.get("name", "")))
    except SchemaError:
        raise
    except MicrogridError as exc:
        raise SchemaError(str(exc), where) from None


def _check_node(net, node, where):
    if node not in net.node_index:
        raise DanglingReferenceError(f"{where}.node: unknown hypernode {node!r}")
    if node == net.slack:
        raise DanglingReferenceError(f"{where}.node: devices cannot sit on the slack hypernode {node!r}")


def _parse_loads(r, net, profile):
    sb = net.base_power
    loads = []
    for rec in r.items("loads"):
        lid = str(rec.get("id"))
        node = str(rec.get("node"))
        _check_node(net, node, rec.where)
        alpha = rec.number("alpha")
        available = net.phases.get(node, PHASES)
        unit = rec.get("unit", "pu")
        scale = 1.0 if unit == "pu" else _POWER.get(unit)
        if scale is None:
            rec._fail("unit", f"unsupported unit {unit!r}")
        scale = scale / sb if unit != "pu" else 1.0
        if "phase_peaks" in rec.data:
            peaks = {}
            for ph, pq in rec.get("phase_peaks").items():
                if not isinstance(pq, list) or len(pq) != 2:
                    raise SchemaError("expected [p, q]", f"{rec.where}.phase_peaks.{ph}")
                peaks[ph] = complex(float(pq[0]), float(pq[1])) * scale
        else:
            peak = rec.number("peak") * scale
            pf = rec.number("power_factor", 1.0)
            if not 0 < pf <= 1:
                rec._fail("power_factor", f"must lie in (0, 1], got {pf}")
            s_peak = peak * complex(1.0, np.tan(np.arccos(pf)))
            shares = rec.get("phase_shares", None)
            if shares is None:
                peaks = {"ABC": s_peak}
            else:
                if not isinstance(shares, dict):
                    rec._fail("phase_shares", "expected an object")
                peaks = {ph: s_peak * float(v) for ph, v in shares.items()}
        for ph, s in peaks.items():
            ph = str(ph).upper()
            if ph == "ABC":
                loads.append(ExponentialLoad(node, s * profile, alpha, None, lid))
                continue
            if ph not in PHASES:
                raise SchemaError(f"unknown phase {ph!r}", f"{rec.where}")
            if ph not in available:
                raise DanglingReferenceError(f"{rec.where}: phase {ph} is absent at hypernode {node!r}")
            loads.append(ExponentialLoad(node, s * profile, alpha, ph, f"{lid}:{ph}"))
    return loads


def parse_devices(data, net, profile, where="devices.json"):
    r = _Reader(data, where)
    sb = net.base_power
    try:
        loads = _parse_loads(r, net, profile)
        pv, wind, bats = [], [], []
        for rec in r.items("pv"):
            node = str(rec.get("node"))
            _check_node(net, node, rec.where)
            rho = rec.child("rho")
            if rho.get("unit") not in ("W/(W/m^2)", "pu/(W/m^2)"):
                rho._fail("unit", "expected 'W/(W/m^2)' or 'pu/(W/m^2)'")
            rho_pu = rho.number("value") / (sb if rho.get("unit").startswith("W") else 1.0)
            pv.append(PvUnit(node, rho_pu, rec.quantity("s_max", _POWER, sb), str(rec.get("id"))))
        for rec in r.items("wind"):
            node = str(rec.get("node"))
            _check_node(net, node, rec.where)
            speed = {"m/s": 1.0, "km/h": 1 / 3.6}
            wind.append(WindTurbine(
                node,
                rec.quantity("p_nom", _POWER, sb),
                rec.quantity("w_nom", speed, 1.0),
                rec.quantity("w_max", speed, 1.0),
                rec.quantity("s_max", _POWER, sb),
                str(rec.get("id")),
            ))
        for rec in r.items("batteries"):
            node = str(rec.get("node"))
            _check_node(net, node, rec.where)
            coeffs = []
            for mode in ("loss_char", "loss_disch"):
                lc = rec.child(mode)
                a = lc.quantity("a", {"1/W": sb, "1/kW": sb / 1e3}, 1.0)
                b = lc.quantity("b", {"1": 1.0}, 1.0)
                c = lc.quantity("c", _POWER, sb)
                coeffs.append((a, b, c))
            bats.append(Battery(
                node,
                rec.quantity("e_min", _ENERGY, sb),
                rec.quantity("e_max", _ENERGY, sb),
                rec.quantity("e_init", _ENERGY, sb),
                coeffs[0],
                coeffs[1],
                rec.quantity("p_char_max", _POWER, sb),
                rec.quantity("p_disch_max", _POWER, sb),
                rec.quantity("s_max", _POWER, sb),
                str(rec.get("id")),
            ))
    except (SchemaError, DanglingReferenceError):
        raise
    except InputError as exc:
        raise SchemaError(str(exc), where) from None
    return DeviceFleet(loads, pv, wind, bats)


_HEADER = re.compile(r"^\s*([A-Za-z_]+)\s*(?:\[(.*)\])?\s*$")
_SERIES_UNITS = {
    "price": _PRICE,
    "demand_scale": {"1": 1.0},
    "wind_speed": {"m/s": 1.0, "km/h": 1 / 3.6},
    "irradiance": {"W/m^2": 1.0},
    "pv_availability": _POWER,
}


def parse_timeseries(text, base_power, dt=1.0, where="timeseries.csv"):
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(i + 1, row) for i, row in enumerate(rows) if row and any(c.strip() for c in row)]
    if not rows:
        raise SchemaError("empty file", where)
    header_line, header = rows[0]
    columns = []
    for k, h in enumerate(header):
        m = _HEADER.match(h)
        if not m:
            raise SchemaError(f"bad column header {h!r}", f"{where}:{header_line}")
        columns.append((m.group(1), m.group(2)))
    names = [c[0] for c in columns]
    for required in ("t", "price", "demand_scale"):
        if required not in names:
            raise SchemaError(f"missing column {required!r}", f"{where}:{header_line}")
    for name, unit in columns:
        if name == "t":
            continue
        if name not in _SERIES_UNITS:
            raise SchemaError(f"unknown column {name!r}", f"{where}:{header_line}")
        if unit not in _SERIES_UNITS[name] and not (name == "pv_availability" and unit == "pu"):
            raise SchemaError(f"column {name!r} needs a unit in {sorted(_SERIES_UNITS[name])}, got {unit!r}",
                              f"{where}:{header_line}")
    values = {name: [] for name in names}
    for line, row in rows[1:]:
        if len(row) != len(columns):
            raise SchemaError(f"expected {len(columns)} fields, found {len(row)}", f"{where}:{line}")
        for (name, _), cell in zip(columns, row):
            try:
                values[name].append(float(cell))
            except ValueError:
                raise SchemaError(f"field {name!r} is not a number: {cell!r}", f"{where}:{line}") from None
    t = np.asarray(values["t"])
    if t.size == 0:
        raise SchemaError("no data rows", where)
    if not np.array_equal(t, np.arange(t.size)):
        raise BundleHorizonError(f"{where}: periods must run 0, 1, ..., n-1 without gaps")
    out = {}
    for name, unit in columns:
        if name == "t":
            continue
        arr = np.asarray(values[name])
        if name == "pv_availability":
            arr = arr if unit == "pu" else arr * _POWER[unit] / base_power
        else:
            arr = arr * _SERIES_UNITS[name][unit]
        out[name] = arr
    try:
        return TimeSeriesSet(dt=dt, **out)
    except InputError as exc:
        raise SchemaError(str(exc), where) from None


def _resolve(path):
    path = Path(path)
    if path.is_dir():
        path = path / "case.json"
    if not path.exists():
        raise SchemaError("file not found", str(path))
    return path


def load_bundle(path):
    """Read and validate a bundle from a directory or a ``case.json`` path."""
    manifest = _resolve(path)
    root = manifest.parent
    r = _Reader(_load_json(manifest), manifest.name)
    files = r.child("files")
    net_file = root / str(files.get("network"))
    dev_file = root / str(files.get("devices"))
    ts_file = root / str(files.get("timeseries"))
    sc = r.child("scenario") if "scenario" in (r.data or {}) else _Reader({}, f"{manifest.name}.scenario")
    dt = sc.quantity("dt", {"h": 1.0, "min": 1 / 60}, 1.0, default=1.0)
    case = int(sc.number("case", 1))
    if case not in (1, 2):
        sc._fail("case", f"must be 1 or 2, got {case}")
    reserve = sc.get("reserve_tau", None)
    options = CaseOptions(
        case=case,
        delta=sc.number("delta", 0.1),
        reserve_tau=None if reserve is None else sc.quantity("reserve_tau", {"h": 1.0}, 1.0),
        horizon=None if sc.get("horizon", None) is None else int(sc.number("horizon")),
        dt=dt,
    )
    net = parse_network(_load_json(net_file), net_file.name)
    try:
        ts_text = ts_file.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read file ({exc.strerror})", str(ts_file)) from None
    series = parse_timeseries(ts_text, net.base_power, dt, ts_file.name)
    fleet = parse_devices(_load_json(dev_file), net, series.demand_scale, dev_file.name)
    if options.horizon is not None and options.horizon != series.horizon:
        raise BundleHorizonError(
            f"{manifest.name}.scenario.horizon is {options.horizon} but {ts_file.name} has {series.horizon} periods"
        )
    bundle = CaseBundle(str(r.get("name", root.name)), net, fleet, series, options, dict(r.get("provenance", {})))
    return bundle


def bundled_case(name):
    """Load one of the shipped bundles: ``"cigre"`` or ``"ieee123"``."""
    root = resources.files("microgrid_tc") / "data" / name
    if not root.is_dir():
        raise SchemaError(f"no bundled case named {name!r}", "bundled_case")
    with resources.as_file(root) as path:
        return load_bundle(path)


def _q(value, unit="pu"):
    return {"value": float(value), "unit": unit}


def _matrix(a):
    return [[float(v) for v in row] for row in np.asarray(a)]


def network_to_dict(net):
    return {
        "name": net.name,
        "base_power": _q(net.base_power, "VA"),
        "base_voltage": _q(net.base_voltage, "V"),
        "v_nom": _q(net.v_nom),
        "slack": net.slack,
        "nodes": [{"id": n, "phases": net.phases.get(n, PHASES)} for n in net.node_ids],
        "branches": [
            {"id": b.name, "from": b.from_node, "to": b.to_node,
             "admittance": {"unit": "pu", "real": _matrix(b.admittance.real), "imag": _matrix(b.admittance.imag)}}
            for b in net.branches
        ],
    }


def _peak(s_zip, profile):
    k = int(np.argmax(profile))
    return s_zip[k] / profile[k] if profile.size and profile[k] > 0 else 0j


def devices_to_dict(fleet, profile):
    loads = {}
    for ld in fleet.loads:
        lid = ld.name.rsplit(":", 1)[0] if ld.phase is not None else ld.name
        rec = loads.setdefault((lid, ld.node, ld.alpha), {"id": lid, "node": ld.node, "alpha": ld.alpha,
                                                          "unit": "pu", "phase_peaks": {}})
        s = _peak(ld.s_zip, profile)
        rec["phase_peaks"]["ABC" if ld.phase is None else ld.phase.name] = [float(s.real), float(s.imag)]
    loss = lambda abc: {"a": _q(abc[0]), "b": _q(abc[1]), "c": _q(abc[2])}
    return {
        "loads": list(loads.values()),
        "pv": [{"id": u.name, "node": u.node, "rho": {"value": u.rho, "unit": "pu/(W/m^2)"}, "s_max": _q(u.s_max)}
               for u in fleet.pv],
        "wind": [{"id": u.name, "node": u.node, "p_nom": _q(u.p_nom), "w_nom": _q(u.w_nom, "m/s"),
                  "w_max": _q(u.w_max, "m/s"), "s_max": _q(u.s_max)} for u in fleet.wind],
        "batteries": [{"id": b.name, "node": b.node, "e_min": _q(b.e_min, "pu*h"), "e_max": _q(b.e_max, "pu*h"),
                       "e_init": _q(b.e_init, "pu*h"), "p_char_max": _q(b.p_char_max),
                       "p_disch_max": _q(b.p_disch_max), "s_max": _q(b.s_max),
                       "loss_char": loss(b.loss_char), "loss_disch": loss(b.loss_disch)} for b in fleet.batteries],
    }


def timeseries_to_csv(series):
    cols = [("t", None, np.arange(series.horizon)), ("price", "$/kWh", series.price),
            ("demand_scale", "1", series.demand_scale), ("wind_speed", "m/s", series.wind_speed)]
    if series.irradiance is not None:
        cols.append(("irradiance", "W/m^2", series.irradiance))
    if series.pv_availability is not None:
        cols.append(("pv_availability", "pu", series.pv_availability))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([name if unit is None else f"{name}[{unit}]" for name, unit, _ in cols])
    for k in range(series.horizon):
        w.writerow([str(int(v[k])) if name == "t" else repr(float(v[k])) for name, _, v in cols])
    return buf.getvalue()


def write_bundle(bundle, directory):
    """Write ``bundle`` as per-unit files that ``load_bundle`` reads back unchanged."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    opts = bundle.options
    manifest = {
        "name": bundle.name,
        "files": {"network": "network.json", "devices": "devices.json", "timeseries": "timeseries.csv"},
        "scenario": {"case": opts.case, "delta": opts.delta,
                     "reserve_tau": None if opts.reserve_tau is None else _q(opts.reserve_tau, "h"),
                     "horizon": opts.horizon, "dt": _q(bundle.series.dt, "h")},
        "provenance": bundle.provenance,
    }
    dump = lambda obj: json.dumps(obj, indent=1, sort_keys=False) + "\n"
    (root / "case.json").write_text(dump(manifest))
    (root / "network.json").write_text(dump(network_to_dict(bundle.network)))
    (root / "devices.json").write_text(dump(devices_to_dict(bundle.fleet, bundle.series.demand_scale)))
    (root / "timeseries.csv").write_text(timeseries_to_csv(bundle.series))
    return root
