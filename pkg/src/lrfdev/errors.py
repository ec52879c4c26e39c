"""Exception hierarchy shared by every module of the package."""


class LRFError(Exception):
    """Base class for all package errors."""


class NumericDomainError(LRFError, ValueError):
    """An input lies outside the domain where a quantity is defined."""


class DegenerateField(NumericDomainError):
    """The weight field has zero total variance."""


class WindowOverflow(LRFError):
    """The certified truncation window exceeds the configured memory cap."""


class NonintegrableMoment(NumericDomainError):
    """Requested moment does not exist for the innovation law."""


class TooManyAtoms(LRFError):
    """Exact enumeration would exceed the state cap."""


class InvalidRegime(NumericDomainError):
    """A normalized moment U_{nt} is not below one, so the deviation range is empty."""


class NegativeWeight(NumericDomainError):
    """A prediction that needs positive weights received a negative one."""


class EmptyKernelSupport(NumericDomainError):
    """All kernel evaluations vanished at the evaluation point."""


class ConfigError(LRFError):
    """Experiment configuration failed validation."""
