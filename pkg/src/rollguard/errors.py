"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument is outside the domain an operation is defined on."""


class SingularityError(DomainError):
    """The tip-point computation is singular (normal gravity component ~ 0)."""


class StaleMeasurementError(DomainError):
    """A constraint row was requested without current measurements."""


class NonFiniteStateError(RuntimeError):
    """Integration produced a non-finite state; the run must abort."""
