"""Day-ahead convex dispatch: assembly, solver adapters and post-solve audits."""
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ConfigurationError
from ..wirtinger import LinearPowerFlow
from .adapters import AdapterResult, CvxpyAdapter, available_adapters, get_adapter
from .audit import audit_tightness, check_invariants, verify_against_oracle
from .core import DispatchSchedule, ScheduleProblem, add_static_reserve, assemble, solve
from .program import AffineExpr, ConicProgram, ProgramBuilder

__all__ = [
    "AdapterResult",
    "AffineExpr",
    "ConicProgram",
    "CvxpyAdapter",
    "DispatchSchedule",
    "ProgramBuilder",
    "ScheduleProblem",
    "TertiaryController",
    "add_static_reserve",
    "assemble",
    "audit_tightness",
    "available_adapters",
    "check_invariants",
    "get_adapter",
    "solve",
    "verify_against_oracle",
]


class TertiaryController(BaseEstimator):
    """Estimator wrapper around assembly and solution of the dispatch program.

    ``fit(network, fleet, series)`` solves the day-ahead schedule and stores
    it in ``schedule_``; ``predict()`` returns the grid-power trajectory.

    Parameters
    ----------
    case : {1, 2}
        1 lets the microgrid export surplus power, 2 forbids it.
    delta : float
        Voltage band as a fraction of the nominal voltage.
    reserve_tau : float or None
        Static-reserve duration in hours; ``None`` disables the constraint.
    solver : str
        Backend solver name known to cvxpy.
    expansion : {"flat", "warm"}
        Expansion point of the power-flow surrogate.
    """

    def __init__(self, case=1, delta=0.1, reserve_tau=None, solver="CLARABEL", expansion="flat"):
        self.case = case
        self.delta = delta
        self.reserve_tau = reserve_tau
        self.solver = solver
        self.expansion = expansion

    def fit(self, network, fleet, series):
        if self.case not in (1, 2):
            raise ConfigurationError(f"case must be 1 or 2, got {self.case}")
        model = LinearPowerFlow(expansion=self.expansion).fit(network, fleet).model_
        self.problem_ = ScheduleProblem.for_case(
            network, fleet, series, case=self.case, linear_model=model, delta=self.delta, reserve_tau=self.reserve_tau
        )
        self.schedule_ = solve(self.problem_, get_adapter(self.solver))
        return self

    def predict(self, X=None):
        check_is_fitted(self, "schedule_")
        return self.schedule_.p_grid

    def score(self, X=None, y=None):
        """Negative operating cost, so that larger is better."""
        check_is_fitted(self, "schedule_")
        return -self.schedule_.objective

    def audit(self):
        check_is_fitted(self, "schedule_")
        return audit_tightness(self.schedule_, self.problem_)
