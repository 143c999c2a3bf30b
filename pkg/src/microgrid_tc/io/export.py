"""Result bundles and their byte-stable CSV/JSON export.

Every CSV has the columns ``t,value`` optionally followed by ``phase``,
``node`` and ``device``. Powers are written in W, energies in Wh, voltages
in per unit and costs in the price currency.
"""
import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import InputError, MicrogridError
from ..network import PHASES
from ..scheduler.audit import audit_tightness, check_invariants, verify_against_oracle


class ExportError(MicrogridError, OSError):
    """The output directory cannot be written."""


@dataclass(frozen=True, eq=False)
class ResultBundle:
    schedule: object
    problem: object
    tightness: object
    invariants: object
    oracle: object = None
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_schedule(cls, schedule, problem, name="", run_oracle=True, extra=None):
        meta = {
            "case_name": name,
            "case": 1 if problem.surplus_allowed else 2,
            "delta": problem.delta,
            "reserve_tau": problem.reserve_tau,
            "horizon": schedule.horizon,
            "dt_hours": problem.series.dt,
            "solver": schedule.solver,
            "status": schedule.status,
            "iterations": schedule.iterations,
            "wall_time_s": round(schedule.wall_time, 6),
            "objective": schedule.objective,
            "max_primal_residual": schedule.max_residual,
            "program_size": schedule.counts,
        }
        meta.update(extra or {})
        oracle = verify_against_oracle(schedule, problem) if run_oracle else None
        return cls(schedule, problem, audit_tightness(schedule, problem), check_invariants(schedule, problem),
                   oracle, meta)


def _fmt(x):
    return format(float(x), ".10g")


def _csv(rows, extra):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "value"] + list(extra))
    for row in rows:
        w.writerow([str(row[0]), _fmt(row[1])] + [str(v) for v in row[2:]])
    return buf.getvalue()


def _per_device(values, devices, scale):
    rows = []
    for t in range(values.shape[0]):
        for k, dev in enumerate(devices):
            rows.append((t, values[t, k] * scale, dev.node, dev.name))
    return _csv(rows, ["node", "device"])


def _series(values, scale=1.0):
    return _csv([(t, v * scale) for t, v in enumerate(values)], [])


def tables(results):
    """Map file name -> CSV text for every figure-analog table."""
    s, p = results.schedule, results.problem
    net, fleet = p.network, p.fleet
    sb = net.base_power
    out = {
        "grid_exchange.csv": _series(s.p_grid, sb),
        "slack_reactive.csv": _series(s.slack_power.imag, sb),
        "losses.csv": _series(s.p_loss, sb),
        "demand.csv": _series(s.load.real.sum(axis=1), sb),
        "prices.csv": _series(s.price),
        "cost.csv": _series(s.price * s.p_grid * p.cost_scale),
        "pv_dispatch.csv": _per_device(s.pv.real, fleet.pv, sb),
        "pv_available.csv": _per_device(s.pv_available, fleet.pv, sb),
        "wind_dispatch.csv": _per_device(s.wind.real, fleet.wind, sb),
        "wind_available.csv": _per_device(s.wind_available, fleet.wind, sb),
        "battery_power.csv": _per_device(s.battery.real, fleet.batteries, sb),
        "soc.csv": _per_device(s.energy, fleet.batteries, sb),
    }
    rows = []
    nodes, phases = np.asarray(net.non_slack_nodes), np.asarray(net.non_slack_phases)
    for t in range(s.horizon):
        mags = np.abs(s.voltages[t])
        for k in range(mags.size):
            rows.append((t, mags[k], PHASES[phases[k]], net.node_ids[nodes[k]]))
    out["voltages.csv"] = _csv(rows, ["phase", "node"])
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(_fmt(obj))
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def export(results, directory):
    """Write all tables plus ``metadata.json`` and ``audit.json``; returns the paths.

    The invariants are re-checked from the trajectories before anything is
    written, so an inconsistent schedule never reaches disk silently.
    """
    recheck = check_invariants(results.schedule, results.problem)
    if not recheck.ok:
        raise InputError(f"refusing to export: invariants violated {recheck.failed}")
    root = Path(directory)
    try:
        root.mkdir(parents=True, exist_ok=True)
        files = tables(results)
        audit = {"tightness": results.tightness.to_dict(), "invariants": recheck.to_dict()}
        if results.oracle is not None:
            audit["oracle"] = results.oracle.to_dict()
        units = {name: ("pu" if name == "voltages.csv" else "$/kWh" if name == "prices.csv" else
                        "$" if name == "cost.csv" else "Wh" if name == "soc.csv" else
                        "var" if name == "slack_reactive.csv" else "W") for name in files}
        meta = dict(results.metadata, units=units)
        files["metadata.json"] = json.dumps(_jsonable(meta), indent=1, sort_keys=True) + "\n"
        files["audit.json"] = json.dumps(_jsonable(audit), indent=1, sort_keys=True) + "\n"
        paths = []
        for name in sorted(files):
            path = root / name
            path.write_text(files[name])
            paths.append(path)
    except OSError as exc:
        raise ExportError(f"cannot write results to {root}: {exc.strerror or exc}") from None
    return paths
