"""Exception hierarchy.  The CLI maps these onto exit codes."""


class SocialLearnError(Exception):
    exit_code = 1


class ConfigError(SocialLearnError, ValueError):
    """Malformed or inconsistent scenario input."""

    exit_code = 2


class DomainError(SocialLearnError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class UnsupportedPolicyError(ConfigError):
    pass


class SizeError(ConfigError):
    pass


class RegimeError(SocialLearnError):
    """The requested quantity does not exist in this belief regime."""

    exit_code = 3


class GridOverflowError(SocialLearnError):
    """Public log-odds left the discretization grid; widen it."""

    exit_code = 3
