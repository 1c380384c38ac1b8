"""Exception types raised across the package."""


class MCDynError(Exception):
    """Base class for all package errors."""


class IntegrationDiverged(MCDynError):
    pass


class EvaluationDiverged(MCDynError):
    pass


class NoUsableSamples(MCDynError):
    pass


class WrongArchitecture(MCDynError):
    pass


class EmptyInput(MCDynError):
    pass


class TooShort(MCDynError):
    pass


class TooSparse(MCDynError):
    pass


class ConstantSeries(MCDynError):
    pass


class NonMonotonicTime(MCDynError):
    pass


class ParseError(MCDynError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(MCDynError):
    pass
