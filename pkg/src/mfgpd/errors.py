"""Exception hierarchy shared by the solver modules."""


class MFGError(Exception):
    """Base class for all package errors."""


class ModelEvaluationError(MFGError):
    """A coefficient evaluator returned a non-finite or malformed value."""

    def __init__(self, message, t=None, x=None, a=None):
        super().__init__(message)
        self.t = t
        self.x = x
        self.a = a


class DiscretizationError(MFGError):
    """The generator cannot be discretized with a positive-coefficient stencil."""


class StabilityError(DiscretizationError):
    """Explicit time stepping would produce negative transition probabilities."""

    def __init__(self, message, max_dt):
        super().__init__(message)
        self.max_dt = max_dt


class InconsistentMeasureError(MFGError):
    """An occupation measure violates the slab-mass or terminal identities."""


class LPSolverError(MFGError):
    """The LP backend broke down (not raised for infeasible/unbounded)."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log or []


class ConfigError(MFGError):
    """Malformed run configuration."""
