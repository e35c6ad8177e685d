"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`IslmError`.
The CLI maps :class:`ConditionError` subclasses to exit code 1 and
:class:`NumericalError` subclasses to exit code 2.
"""

from __future__ import annotations


class IslmError(Exception):
    """Base class for package errors."""


class ConditionError(IslmError):
    """A configuration breaks one of the model's regime conditions."""


class NumericalError(IslmError):
    """A numerical procedure could not produce its result."""


class DomainError(IslmError, ValueError):
    """Aggregate income below zero, or another out-of-domain input."""


class GridError(IslmError, ValueError):
    pass


class NoKaldorInterval(ConditionError):
    pass


class ConditionBroken(ConditionError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class NoEquilibrium(NumericalError):
    pass


class SeedNotFound(NumericalError):
    pass


class FoldCountMismatch(NumericalError):
    pass


class AmbiguousSign(NumericalError):
    pass


class StepFloorReached(NumericalError):
    pass


class DomainExit(NumericalError):
    """Integration halted because Y became negative."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class NoCycle(NumericalError):
    pass


class NonConvergent(NumericalError):
    pass


class NoReturnDrift(NumericalError):
    pass


class NoHysteresis(NumericalError):
    pass


class EmptyGeometry(IslmError, ValueError):
    pass
