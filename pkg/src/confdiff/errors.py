"""Exception hierarchy shared by every module."""


class ConfDiffError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ConfDiffError, ValueError):
    """An argument violates a documented precondition."""


class UnsupportedGradientError(ConfDiffError, ValueError):
    """A gradient was requested for a loss that has none (e.g. zero-one)."""


class InvalidStateError(ConfDiffError, RuntimeError):
    """Internal state does not match the call (e.g. a stale activation cache)."""


class ConfigError(ConfDiffError, ValueError):
    """An experiment or training configuration is inconsistent."""


class AbortedRunError(ConfDiffError, RuntimeError):
    """Training produced non-finite values and was stopped."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
