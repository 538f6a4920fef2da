"""Exception types raised across the package."""


class SupremalError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameter(SupremalError, ValueError):
    pass


class IntegrationFailure(SupremalError):
    pass


class NonIntegrable(SupremalError):
    """The criterion derivative integral does not exist (e.g. mean score on Cauchy data)."""


class MomentDivergence(SupremalError):
    pass


class MgfDivergence(SupremalError):
    pass


class BracketFailure(SupremalError):
    pass


class NoSignChange(SupremalError):
    pass


class EnvelopeUnavailable(SupremalError):
    """Unbounded score on unbounded support: the exponential bounds do not apply."""


class LinearizationFailure(SupremalError):
    pass


class NonUniqueMinimizer(SupremalError):
    pass


class DegenerateQuantile(SupremalError):
    pass


class InvalidSupport(SupremalError, ValueError):
    pass


class MissingLimits(SupremalError):
    pass


class MissingConstants(SupremalError):
    pass


class UnknownScenario(SupremalError, KeyError):
    pass


class MismatchedGrid(SupremalError):
    pass


class SchemaError(SupremalError):
    """Configuration validation failure, carrying the key path and source line."""

    def __init__(self, message, path="", line=None, source=None):
        self.message = message
        self.path = path
        self.line = line
        self.source = source
        where = path or "<root>"
        if line is not None:
            where = f"{where} (line {line})"
        if source:
            where = f"{source}: {where}"
        super().__init__(f"{where}: {message}")
