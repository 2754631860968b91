class GELDGError(RuntimeError):
    """Base class for solver failures."""


class MeshTanglingError(GELDGError):
    """A dynamic cell collapsed or inverted inside a time slab."""

    def __init__(self, cell, width):
        self.cell = cell
        self.width = width
        super().__init__(
            f"mesh tangling in cell {cell}: dynamic width {width:.3e} <= 0 "
            "(time step too large for the edge-speed spread)"
        )


class ConditioningError(GELDGError):
    """A time-dependent mass matrix is singular or badly conditioned."""


class BoundViolationError(GELDGError):
    """Cell averages left the admissible range before rescaling."""


class LimiterPreconditionError(GELDGError):
    """The first-order reference update is itself out of bounds."""


class TracingError(GELDGError):
    """A characteristic did not reach the boundary in the search window."""


class OutOfDomainError(ValueError):
    pass
