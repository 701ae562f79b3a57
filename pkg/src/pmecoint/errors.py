"""Exception types shared across the package."""


class PmeError(Exception):
    """Base class for all estimation and simulation errors."""


class ValidationError(PmeError):
    """Panel failed pre-estimation validation."""


class LengthError(PmeError):
    """A unit's series is too short for the requested sub-sampling."""


class DegenerateVariableError(PmeError):
    """A variable has zero (or non-finite) dispersion where dispersion is required."""


class IdentificationError(PmeError):
    """The identifying restrictions cannot be applied (singular or ill-conditioned)."""


class NumericalError(PmeError):
    """A numerical routine failed to converge or produced an invalid result."""


class DesignError(PmeError):
    """A Monte Carlo design is infeasible or produced too many failures."""
