"""Exception hierarchy shared by the numerical modules and the CLI."""


class DeltaScatError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(DeltaScatError, ValueError):
    pass


class BranchError(DeltaScatError, ValueError):
    """Spectral parameter outside the supported sheet or below the floor."""


class ConvergenceError(DeltaScatError):
    """An iteration hit its cap. ``last`` holds the final iterate."""

    def __init__(self, message, last=None, trace=None):
        super().__init__(message)
        self.last = last
        self.trace = trace


class ContourError(DeltaScatError):
    """Contour passes too close to a zero or the phase jumps too much."""


class InconsistencyError(DeltaScatError):
    """Two independent counts of the same quantity disagree."""


class ProbeRankError(DeltaScatError):
    """The moment matrix is full rank; more probes or moments are needed."""


class IllConditionedError(DeltaScatError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class PoleTooCloseError(DeltaScatError):
    pass


class IncompleteExpansionError(DeltaScatError):
    pass


class CFLError(DeltaScatError, ValueError):
    """Time step too large for the leapfrog scheme with the given potential."""


class GridAlignmentError(DeltaScatError, ValueError):
    """A delta point does not fall on a grid node."""
