"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ModeError(DomainError):
    """A privacy budget carries a mode the operation does not accept."""


class ConfigError(ValueError):
    """An experiment configuration is malformed.

    The offending key, when there is one, is available as ``key``.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
