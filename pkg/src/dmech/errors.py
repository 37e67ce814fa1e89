"""Exception hierarchy shared by every module."""


class DmechError(Exception):
    """Base class for all library errors."""


class EvaluationError(DmechError):
    """A user function returned a non-finite value."""


class SingularSystemError(DmechError):
    """A linear solve met a Jacobian whose condition estimate is too large."""

    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class NoConvergenceError(DmechError):
    """Newton iteration ran out of iterations; ``best`` holds the best iterate."""

    def __init__(self, message, best=None, residual_norm=float("inf")):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm


class DescriptorMismatchError(DmechError):
    """Group elements or vectors do not match the group descriptor."""


class PreconditionError(DmechError):
    """An operation was called on data violating its precondition."""


class NotInSameFiberError(PreconditionError):
    pass


class MomentumMismatchError(PreconditionError):
    pass


class ConstraintViolationError(PreconditionError):
    pass


class NotMuGoodError(PreconditionError):
    pass


class SimulationError(DmechError):
    """A stepper failed at a given step index (the index of the point being solved for)."""

    def __init__(self, index, cause):
        super().__init__(f"step producing point {index} failed: {cause}")
        self.index = index
        self.cause = cause


class ConfigError(DmechError):
    """Config parse/validation failure, with optional line number and field name."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field
