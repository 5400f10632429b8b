"""Exception hierarchy shared by all submodules."""


class HopfMeanError(Exception):
    """Base class for every error raised by :mod:`hopfmean`."""


class ExpressionSyntaxError(HopfMeanError):
    """Malformed expression source. ``offset`` is the byte offset of the fault."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(HopfMeanError):
    pass


class ArityError(HopfMeanError):
    pass


class MissingParameterError(HopfMeanError):
    pass


class NonFiniteError(HopfMeanError):
    """A vector-field evaluation or finite-difference probe produced inf/nan."""


class ConvergenceError(HopfMeanError):
    """An iterative solver (Newton, QR, root finder, shooting) did not converge."""


class SingularJacobianError(HopfMeanError):
    pass


class NoComplexPairError(HopfMeanError):
    pass


class NonSimpleEigenvalueError(HopfMeanError):
    pass


class BracketError(HopfMeanError):
    """No sign change of mu(alpha) across the requested interval."""


class ResonanceError(HopfMeanError):
    """A shifted matrix (s*I - A) needed by the normal form is near singular."""


class DegenerateLyapunovError(HopfMeanError):
    """Re(c1) vanishes, so the normal form does not determine a cycle."""

    def __init__(self, message, re_c1=0.0):
        super().__init__(message)
        self.re_c1 = re_c1


class ImaginaryResidueError(HopfMeanError):
    """A quantity that must be real carries an imaginary part above tolerance."""


class StepSizeError(HopfMeanError):
    """The integrator step size underflowed."""


class CycleNotFoundError(HopfMeanError):
    """No limit cycle could be settled onto (decay, escape or time limit)."""
