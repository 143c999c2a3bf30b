"""Solver adapters: translate a ``ConicProgram`` into a concrete conic solver call.

Every adapter exposes ``capabilities`` and ``solve(program) -> AdapterResult``.
The cvxpy-backed adapter covers Clarabel, ECOS, SCS and CVXOPT.
"""
import time
from dataclasses import dataclass

import numpy as np

CAPABILITIES = frozenset({"affine_equalities", "convex_quadratic_inequalities", "second_order_cones"})


@dataclass
class AdapterResult:
    status: str  # optimal | inaccurate | infeasible | unbounded | failure
    x: np.ndarray
    objective: float
    iterations: int
    wall_time: float
    solver: str
    raw_status: str = ""
    message: str = ""


class CvxpyAdapter:
    """Solve through cvxpy with a named backend solver.

    ``settings`` are forwarded to ``Problem.solve``. Solver defaults are
    tightened where cvxpy's would leave the primal residual above 1e-6.
    """

    capabilities = CAPABILITIES
    _defaults = {
        "CLARABEL": {"tol_gap_abs": 1e-9, "tol_gap_rel": 1e-9, "tol_feas": 1e-9},
        "ECOS": {"abstol": 1e-9, "reltol": 1e-9, "feastol": 1e-9, "max_iters": 200},
        "SCS": {"eps_abs": 1e-6, "eps_rel": 1e-6, "max_iters": 20000},
        "CVXOPT": {"abstol": 1e-9, "reltol": 1e-9, "feastol": 1e-9},
    }

    def __init__(self, solver="CLARABEL", **settings):
        self.solver = solver.upper()
        self.settings = settings

    @property
    def name(self):
        return self.solver

    def available(self):
        import cvxpy as cp

        return self.solver in cp.installed_solvers()

    def to_cvxpy(self, program):
        import cvxpy as cp

        x = cp.Variable(program.n)
        cons = []
        if program.A_eq.shape[0]:
            cons.append(program.A_eq @ x == program.b_eq)
        if program.G.shape[0]:
            cons.append(program.G @ x <= program.h)
        for q in program.quadratic:
            z = q.F @ x + q.f
            cons.append(q.aggregator() @ cp.square(z) <= q.g @ x + q.h)
        for c in program.cones:
            z = cp.reshape(c.E @ x + c.e, (c.count, c.dim), order="C")
            cons.append(cp.SOC(c.t_A @ x + c.t_b, z, axis=1))
        prob = cp.Problem(cp.Minimize(program.c @ x + program.c0), cons)
        return prob, x

    def solve(self, program):
        import cvxpy as cp

        prob, x = self.to_cvxpy(program)
        opts = dict(self._defaults.get(self.solver, {}))
        opts.update(self.settings)
        start = time.perf_counter()
        try:
            prob.solve(solver=self.solver, **opts)
        except Exception as exc:  # backends raise their own types (e.g. ARPACK non-convergence)
            return AdapterResult("failure", np.full(program.n, np.nan), np.nan, 0,
                                 time.perf_counter() - start, self.solver, type(exc).__name__, str(exc))
        wall = time.perf_counter() - start
        stats = prob.solver_stats
        iterations = int(stats.num_iters) if stats is not None and stats.num_iters is not None else -1
        raw = prob.status
        status = {
            cp.OPTIMAL: "optimal",
            cp.OPTIMAL_INACCURATE: "inaccurate",
            cp.INFEASIBLE: "infeasible",
            cp.INFEASIBLE_INACCURATE: "infeasible",
            cp.UNBOUNDED: "unbounded",
            cp.UNBOUNDED_INACCURATE: "unbounded",
        }.get(raw, "failure")
        xv = np.asarray(x.value, dtype=float) if x.value is not None else np.full(program.n, np.nan)
        obj = float(prob.value) if status in ("optimal", "inaccurate") else np.nan
        return AdapterResult(status, xv, obj, iterations, wall, self.solver, raw)


# CVXOPT is supported by name but left out of the default set: its dense KKT
# handling does not scale to the bundled cases.
DEFAULT_SOLVERS = ("CLARABEL", "ECOS", "SCS")


def available_adapters(names=DEFAULT_SOLVERS):
    return [CvxpyAdapter(n) for n in names if CvxpyAdapter(n).available()]


def get_adapter(name):
    adapter = CvxpyAdapter(name)
    if not adapter.available():
        from ..exceptions import SolverFailure

        raise SolverFailure(f"solver {name!r} is not installed", status="unavailable")
    return adapter
