"""Exception types shared across the pipeline.

Everything raised on bad user input derives from SsaamError so the CLI can
map it to exit code 2; anything else is treated as an internal error.
"""


class SsaamError(Exception):
    """Base class for input and configuration errors."""


# data loading / alignment
class InputFormatError(SsaamError):
    """Malformed file: bad header, wrong column count, unreadable layout."""


class NoParseableRowsError(SsaamError):
    """A loader dropped every row of the file."""


class DuplicateDateError(SsaamError):
    """Two kept rows share the same calendar date."""


class EmptyIntersectionError(SsaamError):
    """Date join produced no common dates."""


# sentiment
class TooFewScoresError(SsaamError):
    """Quartiles need at least four finite scores."""


# causal discovery
class InvalidLagError(SsaamError):
    """Lag must be a positive integer."""


class InsufficientSamplesError(SsaamError):
    """Not enough observations for the requested model."""


class SingularRegressorsError(SsaamError):
    """Regressor matrix is rank deficient (e.g. a constant series)."""


class RankDeficientCovarianceError(SsaamError):
    """Residual covariance is not full rank; whitening impossible."""


class DegenerateUnmixingError(SsaamError):
    """No row assignment of the unmixing matrix yields a nonzero diagonal."""


class UnknownVariableError(SsaamError):
    """Variable name not present in the causal graph."""


# change-point detection
class InvalidSegmentError(SsaamError):
    """Segment bounds are empty or out of range."""


class InfeasibleBreakpointsError(SsaamError):
    """Requested breakpoint count cannot be placed under min_size."""


# backtesting
class InsufficientHistoryError(SsaamError):
    """Not enough price history before the first rebalance date."""


class ConfigError(SsaamError):
    """Invalid run configuration."""
