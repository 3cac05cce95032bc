"""Exception types raised across the package."""


class Qdyn1dError(Exception):
    """Base class for all package errors."""


class InvalidRule(Qdyn1dError):
    pass


class NonPrefixRule(InvalidRule):
    pass


class WindowTooLarge(Qdyn1dError):
    pass


class OutOfWindow(Qdyn1dError):
    pass


class NoKnownSpecialEnergy(Qdyn1dError):
    pass


class RootFindingFailure(Qdyn1dError):
    pass


class RationalInput(Qdyn1dError):
    pass


class ZeroCoupling(Qdyn1dError):
    pass


class FiniteSizeViolation(Qdyn1dError):
    pass


class DegenerateReference(Qdyn1dError):
    pass


class UnknownTheorem(Qdyn1dError):
    pass


class ConfigError(Qdyn1dError):
    """Invalid experiment configuration; ``key`` points at the offending field."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
