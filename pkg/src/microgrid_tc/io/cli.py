"""Command-line driver: ``microgrid-tc {validate,powerflow,schedule,compare} BUNDLE``.

``BUNDLE`` is a bundle directory, a ``case.json`` path, a shipped case name
(``cigre``, ``ieee123``) or ``random`` for a seeded random instance.

Exit codes: 0 success, 2 parse/configuration error, 3 infeasible,
4 solver failure, 5 audit failure.
"""
import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from ..devices import TimeSeriesSet, placement_matrix, pv_availability, wind_availability
from ..exceptions import (
    BundleError,
    ConfigurationError,
    InaccurateSolveError,
    InfeasibleError,
    InputError,
    NetworkStructureError,
    NotConvergedError,
    SolverError,
)
from ..network import branch_loss_factors
from ..oracle import ExactPowerFlow
from ..scheduler import ScheduleProblem, available_adapters, get_adapter, solve
from .bundle import CaseBundle, CaseOptions, bundled_case, load_bundle
from .export import ExportError, ResultBundle, export
from .synthetic import DEMAND_PROFILE, IRRADIANCE, PRICE, random_fleet, random_network, wind_speed_profile

EXIT_OK, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_SOLVER, EXIT_AUDIT = 0, 2, 3, 4, 5
BUILTIN = ("cigre", "ieee123")
CONSERVATION_TOL = 1e-6


def random_bundle(seed, horizon=4):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 6, partial_phase_prob=0.2)
    fleet = random_fleet(rng, net, horizon, n_pv=1, n_wind=1, n_bat=1)
    series = TimeSeriesSet(PRICE[:horizon], DEMAND_PROFILE[:horizon], wind_speed_profile()[:horizon],
                           IRRADIANCE[8:8 + horizon])
    return CaseBundle(f"random-{seed}", net, fleet, series, CaseOptions(horizon=horizon))


def resolve_bundle(source, seed=0):
    if source in BUILTIN and not Path(source).exists():
        return bundled_case(source)
    if source == "random" and not Path(source).exists():
        return random_bundle(seed)
    return load_bundle(source)


def _options(args, bundle):
    return bundle.with_options(case=args.case, delta=args.delta, reserve_tau=args.reserve_tau,
                               horizon=args.horizon, dt=args.dt)


def _problem(bundle):
    o = bundle.options
    return ScheduleProblem.for_case(bundle.network, bundle.fleet, bundle.series, case=o.case, delta=o.delta,
                                    reserve_tau=o.reserve_tau)


def cmd_validate(args, bundle):
    net, fleet = bundle.network, bundle.fleet
    branch_loss_factors(net)
    fleet.check_horizon(bundle.series.horizon)
    print(f"{bundle.name}: {net.n_nodes} hypernodes, {len(net.branches)} branches, "
          f"{len(net.non_slack_index)} non-slack phases")
    print(f"devices: {len(fleet.loads)} load components, {len(fleet.pv)} PV, {len(fleet.wind)} wind, "
          f"{len(fleet.batteries)} batteries; horizon {bundle.series.horizon} x {bundle.series.dt} h")
    return EXIT_OK


def cmd_powerflow(args, bundle):
    net, fleet, series = bundle.network, bundle.fleet, bundle.series
    t = int(np.argmax(series.demand_scale)) if args.period is None else args.period
    if not 0 <= t < series.horizon:
        raise ConfigurationError(f"period {t} outside the horizon of {series.horizon}")
    oracle = ExactPowerFlow().fit(net, fleet)
    s = np.zeros(len(net.non_slack_index), dtype=complex)
    if args.renewables:
        if fleet.pv:
            s += placement_matrix(net, fleet.pv) @ pv_availability(fleet, series)[:, t]
        if fleet.wind:
            s += placement_matrix(net, fleet.wind) @ wind_availability(fleet, series)[:, t]
    sol = oracle.predict(s, t, raise_on_failure=True)
    sb = net.base_power
    mag = np.abs(sol.v)
    print(f"period {t}: converged in {sol.iterations} iterations (mismatch {sol.residual:.2e} pu)")
    if mag.size:
        print(f"|V| min {mag.min():.6f} pu, max {mag.max():.6f} pu")
    print(f"grid power {oracle.grid_power(sol.v).real * sb:.3f} W, losses {oracle.losses(sol.v) * sb:.3f} W")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "powerflow_voltages.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "value", "phase", "node"])
            for k, (node, ph) in enumerate(zip(net.non_slack_nodes, net.non_slack_phases)):
                w.writerow([t, format(mag[k], ".10g"), "ABC"[ph], net.node_ids[node]])
    return EXIT_OK


def _audit_status(results, strict):
    failures = []
    if not results.invariants.ok:
        failures.append(f"invariants violated: {results.invariants.failed}")
    o = results.oracle
    if o is not None:
        if not np.all(o.converged):
            failures.append("oracle replay did not converge")
        elif np.max(np.abs(o.conservation), initial=0.0) > CONSERVATION_TOL:
            failures.append("oracle power balance not conserved")
    if strict and not results.tightness.tight:
        failures.append(f"relaxation gap {results.tightness.max_gap:.2e} above {results.tightness.tol:.0e}")
    return failures


def cmd_schedule(args, bundle):
    problem = _problem(bundle)
    schedule = solve(problem, get_adapter(args.solver))
    results = ResultBundle.from_schedule(schedule, problem, bundle.name)
    sb = bundle.network.base_power
    t = results.tightness
    print(f"{bundle.name} case {bundle.options.case}: {schedule.status} with {schedule.solver} in "
          f"{schedule.iterations} iterations, {schedule.wall_time:.3f} s")
    print(f"operating cost {schedule.objective:.6f} $, grid import peak {schedule.p_grid.max() * sb:.1f} W, "
          f"min {schedule.p_grid.min() * sb:.1f} W")
    print(f"relaxation max gap {t.max_gap:.3e} pu ({'tight' if t.tight else 'not tight'}); "
          f"simultaneous charge/discharge periods {t.simultaneous_periods.tolist()}")
    if results.oracle is not None:
        print(f"oracle replay: max voltage deviation {results.oracle.max_voltage_error:.3e} pu, "
              f"max grid-power deviation {results.oracle.max_grid_error * sb:.3f} W")
    failures = _audit_status(results, args.strict_audit)
    if args.out:
        export(results, args.out)
        print(f"results written to {args.out}")
    for f in failures:
        print(f"AUDIT FAILURE: {f}", file=sys.stderr)
    return EXIT_AUDIT if failures else EXIT_OK


def compare_solvers(problem, names=None):
    """Solve ``problem`` with every available adapter; one row per adapter."""
    adapters = available_adapters(names) if names else available_adapters()
    rows = []
    for adapter in adapters:
        row = {"solver": adapter.name, "status": "optimal", "iterations": -1, "time_s": float("nan"),
               "cost": float("nan")}
        try:
            sched = solve(problem, adapter)
            row.update(iterations=sched.iterations, time_s=sched.wall_time, cost=sched.objective)
        except SolverError as exc:
            r = exc.result
            row["status"] = exc.status or "failure"
            if r is not None:
                row.update(iterations=r.iterations, time_s=r.wall_time,
                           cost=r.objective if isinstance(exc, InaccurateSolveError) else float("nan"))
        rows.append(row)
    return rows


def objectives_agree(rows, rtol=1e-6):
    costs = [r["cost"] for r in rows if r["status"] == "optimal"]
    if len(costs) < 2:
        return True
    ref = costs[0]
    return all(abs(c - ref) <= rtol * max(1.0, abs(ref)) for c in costs)


def cmd_compare(args, bundle):
    import warnings

    problem = _problem(bundle)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = compare_solvers(problem, args.solvers)
    print(f"{'solver':<10}{'status':<12}{'iterations':>11}{'time (s)':>11}{'cost ($)':>18}")
    for r in rows:
        print(f"{r['solver']:<10}{r['status']:<12}{r['iterations']:>11d}{r['time_s']:>11.3f}{r['cost']:>18.9f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "compare.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["solver", "status", "iterations", "time_s", "cost"])
            for r in rows:
                w.writerow([r["solver"], r["status"], r["iterations"], format(r["time_s"], ".6g"),
                            format(r["cost"], ".12g")])
    if not any(r["status"] == "optimal" for r in rows):
        print("no adapter reached an accurate optimum", file=sys.stderr)
        return EXIT_SOLVER
    if not objectives_agree(rows):
        print("AUDIT FAILURE: optimal objectives disagree beyond 1e-6 relative", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="microgrid-tc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("bundle", nargs="?", default="cigre", help="bundle directory, case.json, cigre, ieee123 or random")
        p.add_argument("--case", type=int, choices=(1, 2))
        p.add_argument("--delta", type=float, help="voltage band, fraction of nominal")
        p.add_argument("--reserve-tau", type=float, help="static reserve duration in hours")
        p.add_argument("--horizon", type=int)
        p.add_argument("--dt", type=float, help="period length in hours")
        p.add_argument("--solver", default="CLARABEL")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, default=0, help="seed for the random bundle")
        return p

    common(sub.add_parser("validate", help="check the bundle invariants"))
    pf = common(sub.add_parser("powerflow", help="exact power-flow snapshot"))
    pf.add_argument("--period", type=int, help="period to solve (default: demand peak)")
    pf.add_argument("--renewables", action="store_true", help="inject PV and wind availability")
    sc = common(sub.add_parser("schedule", help="solve the day-ahead dispatch and audit it"))
    sc.add_argument("--strict-audit", action="store_true", help="fail when a relaxation is not tight")
    cp = common(sub.add_parser("compare", help="solve with every available solver"))
    cp.add_argument("--solvers", nargs="+", help="restrict to these solver names")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"validate": cmd_validate, "powerflow": cmd_powerflow, "schedule": cmd_schedule, "compare": cmd_compare}
    try:
        bundle = _options(args, resolve_bundle(args.bundle, args.seed))
        return handlers[args.command](args, bundle)
    except (BundleError, ConfigurationError, NetworkStructureError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SolverError, NotConvergedError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
