"""Exception hierarchy shared by every module.

The CLI maps :class:`DomainError` (and subclasses) to exit status 1 and
:class:`OSError` to exit status 2.
"""


class MemeticError(Exception):
    """Base class for all package errors."""


class DomainError(MemeticError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class StructuralError(DomainError):
    """Shapes, compartment names or model kinds do not fit together."""


class ConfigurationError(DomainError):
    """A solver configuration is invalid (e.g. an unstable time step)."""


class StiffnessError(DomainError):
    """The adaptive step size collapsed below the allowed minimum."""


class IntegratorFault(DomainError):
    """A trajectory left the admissible set (negative or non-conserved)."""


class MeasurementError(DomainError):
    """A derived quantity cannot be measured from the supplied data."""


class FitFailure(DomainError):
    """Every trial point of a calibration run failed to integrate."""


class IngestError(DomainError):
    """A tweet corpus could not be ingested."""


class UndefinedScoreError(DomainError):
    """The propagation weight of a meme is infinite (no non-retweeting accounts)."""
