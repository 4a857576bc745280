"""Exception types shared across the package."""


class LagflowError(Exception):
    """Base class for all package errors."""


class ChartExit(LagflowError):
    """A point left the safe region of the ambient chart."""


class DegenerateMetric(LagflowError):
    """The induced metric lost positivity (folding or collapse)."""


class DefectBlowup(LagflowError):
    """The Lagrangian defect exceeded its configured tolerance."""


class NotClosed(LagflowError):
    """The mean curvature form failed the closedness precondition."""


class NotMinimal(LagflowError):
    """An operation requiring a (numerically) minimal base was given one
    with too large a mean curvature."""


class NoConvergence(LagflowError):
    """Eigenvalue iteration stopped before reaching the residual target."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ClusterAmbiguous(LagflowError):
    """The first eigenvalue cluster cannot be separated from the rest of
    the spectrum at the configured tolerance."""


class SpectrumTruncation(LagflowError):
    """The computed eigenbasis captures too little of a potential's norm."""


class ScaleViolation(LagflowError):
    """The L2 smallness hypothesis of the sup-norm bound does not hold at
    the requested scale."""


class WindowTooShort(LagflowError):
    """A rate fit was requested on a window with too few samples."""


class ParseError(LagflowError):
    """A scenario file could not be parsed; carries line diagnostics."""


class ValidationError(LagflowError):
    """A parsed scenario violates one or more constraints (all listed)."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
