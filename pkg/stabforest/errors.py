"""
This file contains the exceptions raised by stabforest
"""


class StabForestError(Exception):
    """Base class of every error the command line turns into an error log."""


class DatasetError(StabForestError, ValueError):
    """The input data violates a dataset invariant."""


class DegenerateFoldError(StabForestError):
    """A training set holds a single class."""


class ConfigError(StabForestError, ValueError):
    """A parameter or a configuration file is invalid."""


class NoBallotsError(StabForestError):
    """A ranking was requested from a tally without ballots."""


class StatsError(StabForestError, ValueError):
    """A statistic is undefined for the given input."""
