"""Exception hierarchy.

Input problems derive from :class:`InputError` (CLI exit code 1), numeric
failures from :class:`NumericError` (exit code 2).
"""


class CacError(Exception):
    """Base class for every error raised by this package."""


class InputError(CacError, ValueError):
    pass


class InvalidParams(InputError):
    pass


class WrongMode(InputError):
    pass


class NumericError(CacError, RuntimeError):
    pass


class NotConverged(NumericError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class ReducibleChain(NumericError):
    pass


class CapacityOverflow(NumericError):
    pass


class ConfigError(InputError):
    """Collects every field-level problem found while parsing a config."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(str(e) for e in self.errors))

    def keys(self):
        return [e.key for e in self.errors]
