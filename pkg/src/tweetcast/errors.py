"""Exception hierarchy shared across the pipeline.

Three broad families map onto CLI exit codes: configuration problems (2),
data problems (3), and numerical failures (4).
"""

from __future__ import annotations


class TweetcastError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TweetcastError):
    """Invalid or inconsistent configuration. CLI exit code 2."""


class DataError(TweetcastError):
    """Malformed, missing, or contradictory input data. CLI exit code 3."""


class NumericalError(TweetcastError):
    """A numerical routine failed beyond recovery. CLI exit code 4."""


class SingleClassError(DataError):
    """A binary-label operation was given only one class."""


class NotStandardizedError(DataError):
    """An operation requiring standardized inputs got raw ones."""


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, (DataError, OSError)):
        return EXIT_DATA
    return 1
