"""Exception hierarchy shared by every mrwlab module."""


class MRWError(ValueError):
    """Base class for all library errors."""


class ParameterError(MRWError):
    """Walk parameters outside [0, 1] or otherwise unusable."""


class TrivialWalkError(ParameterError):
    """p = 1 and q = 0: every step copies the first one (a = 1)."""


class DomainError(MRWError):
    """Argument outside the domain where a formula is defined."""


class RegimeError(MRWError):
    """Operation called for a regime it does not apply to."""


class DegenerateError(MRWError):
    """Target variance is zero, so a normalized statistic is meaningless."""


class ResourceError(MRWError):
    """Requested size exceeds a configured limit."""


class TableError(MRWError):
    """A sequence table does not cover the requested horizon."""


class ConfigError(MRWError):
    """Invalid experiment configuration."""


class NearPoleWarning(RuntimeWarning):
    """A closed form was evaluated close to one of its poles."""
