"""Exception hierarchy shared across the harness."""


class PatchEvalError(Exception):
    """Base class for all harness errors."""


class ConfigError(PatchEvalError):
    """Campaign configuration is invalid; maps to CLI exit code 2."""
