"""Exception hierarchy. Each fatal error maps to a CLI exit code."""


class ResilienceError(Exception):
    exit_code = 1


class ConfigError(ResilienceError):
    exit_code = 2


class DataError(ResilienceError):
    exit_code = 3


class ConvergenceError(ResilienceError):
    exit_code = 4


class InsufficientDataError(DataError):
    """Too few rows for the requested fit or split."""
