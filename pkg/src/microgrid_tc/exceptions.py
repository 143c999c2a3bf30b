"""Exception and warning classes raised across the package."""


class MicrogridError(Exception):
    """Base class for all package errors."""


class NetworkStructureError(MicrogridError, ValueError):
    """The hypergraph is malformed (disconnected, dangling ids, bad slack)."""


class InputError(MicrogridError, ValueError):
    """A numeric input has the wrong shape, sign or value."""


class ConfigurationError(MicrogridError, ValueError):
    """Scenario options are inconsistent with the data (e.g. reserve without batteries)."""


class HorizonMismatchError(ConfigurationError):
    """Time series or device horizons disagree."""


class SolverError(MicrogridError, RuntimeError):
    """Base class for solver outcomes other than an accurate optimum."""

    def __init__(self, message, status=None, result=None):
        super().__init__(message)
        self.status = status
        self.result = result


class InfeasibleError(SolverError):
    """The conic program has no feasible point."""


class UnboundedError(SolverError):
    """The conic program is unbounded below."""


class SolverFailure(SolverError):
    """The solver stopped on a numerical failure or was unavailable."""


class InaccurateSolveError(SolverError):
    """The solver finished but the point misses the accuracy requirement."""


class InaccurateSolutionWarning(UserWarning):
    """Emitted whenever a solve is reported inaccurate."""


class NotConvergedError(MicrogridError, RuntimeError):
    """The nonlinear power-flow oracle did not converge."""


class BudgetExceededError(MicrogridError, ValueError):
    """Brute-force enumeration would exceed its evaluation budget."""


class BundleError(InputError):
    """Base class for problems found while reading a case bundle."""


class SchemaError(BundleError):
    """A bundle file does not parse or violates its schema.

    ``location`` names the file and line or field path of the offending record.
    """

    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class DanglingReferenceError(BundleError):
    """A device references a hypernode or phase that the network does not have."""


class BundleHorizonError(BundleError, HorizonMismatchError):
    """The time-series file and the scenario horizon disagree."""
