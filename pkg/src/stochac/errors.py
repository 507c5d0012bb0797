"""Exception hierarchy shared by the solvers."""


class StochacError(Exception):
    """Base class for all package errors."""


class ParameterError(StochacError, ValueError):
    """An argument violates a documented precondition."""


class RangeError(StochacError, ValueError):
    """Evaluation requested outside the domain of definition."""


class RootCollisionError(ParameterError):
    """The forcing level is too large for three distinct equilibria."""


class SolverError(StochacError, RuntimeError):
    """An iterative solver failed to converge.

    Attributes
    ----------
    history : list of float
        Residual norms of the iterations that were performed.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class BlowUpError(SolverError):
    """The state left its admissible band during time stepping."""

    def __init__(self, message, t, max_abs):
        super().__init__(message)
        self.t = t
        self.max_abs = max_abs
