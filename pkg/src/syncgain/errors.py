"""Exception hierarchy shared by all modules."""


class SyncGainError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(SyncGainError, ValueError):
    pass


class NonFinite(SyncGainError, ValueError):
    pass


class InvalidGraph(SyncGainError, ValueError):
    pass


class UnknownPreset(SyncGainError, KeyError):
    pass


class MultipleZeroEigenvalues(SyncGainError):
    """The Laplacian has a repeated zero eigenvalue: the graph is not connected."""


class NotControllable(SyncGainError, ValueError):
    pass


class NotHurwitz(SyncGainError, ValueError):
    pass


class IllConditioned(SyncGainError):
    pass


class NoStabilizingSolution(SyncGainError):
    pass


class ResidualTooLarge(SyncGainError):
    pass


class EmptyValueList(SyncGainError, ValueError):
    pass


class FrozenGainViolatesNormBound(SyncGainError):
    """The frozen (X, Y) pair does not satisfy the gain-norm LMI."""


class SolverFailure(SyncGainError):
    """The conic solver neither certified feasibility nor infeasibility.

    ``diagnostics`` carries whatever the backend reported.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InfeasibleAtInitialization(SyncGainError):
    """No multiplier scaling in the grid is feasible at rate zero."""


class NonFiniteState(SyncGainError):
    """Simulation blew up (closed loop is unstable or the step is too large)."""


class DegenerateWindow(SyncGainError, ValueError):
    pass


class ConfigError(SyncGainError, ValueError):
    pass
