"""Exception hierarchy shared by all threshnet modules."""


class ThreshnetError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(ThreshnetError, ValueError):
    pass


class TopologyError(ThreshnetError, ValueError):
    pass


class ConnectivityError(TopologyError):
    """Raised when some node (or the source) cannot reach ground."""


class RankError(ThreshnetError):
    """The capacitance Laplacian B C B^T is not positive definite."""


class UnsupportedEvaluationError(ThreshnetError):
    """A characteristic was asked for something it cannot provide."""


class MultivaluedInverseError(ThreshnetError):
    pass


class StiffnessError(ThreshnetError):
    """The integrator could not take a step. ``state`` holds diagnostics."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state or {}


class SolverError(ThreshnetError):
    """Steady-state iteration failed to converge."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class ConfigError(ThreshnetError, ValueError):
    pass
