"""Exception hierarchy shared across the toolkit."""


class EpikitError(Exception):
    """Base class for all toolkit errors."""


class DataError(EpikitError):
    """Malformed or insufficient input data."""


class NumericalError(EpikitError):
    """A numerical procedure failed or broke down."""


# -- data ingestion ----------------------------------------------------------

class MissingColumn(DataError):
    pass


class UnparseableDate(DataError):
    pass


class NegativeValue(DataError):
    pass


class InsufficientHistory(DataError):
    pass


class SeriesTooShort(DataError):
    pass


# -- time-series analytics ---------------------------------------------------

class ZeroVariance(DataError):
    pass


class NumericalBreakdown(NumericalError):
    pass


class TooFewWeeks(DataError):
    pass


class ZeroWeekSum(DataError):
    pass


class ZeroDenominator(DataError):
    pass


# -- forecasting -------------------------------------------------------------

class NonPositiveValue(DataError):
    pass


class NonConvergence(NumericalError):
    pass


class NonStationaryFit(NumericalError):
    pass


class AllFitsFailed(NumericalError):
    pass


# -- agent-based model -------------------------------------------------------

class InvalidDistribution(DataError):
    pass


class TestsSeriesTooShort(DataError):
    pass


# -- calibration -------------------------------------------------------------

class WindowMismatch(DataError):
    pass


class StoreTooSmall(DataError):
    pass


class EmptyPoints(DataError):
    pass


class WindowWithoutData(DataError):
    pass


# -- reporting ---------------------------------------------------------------

class EnsembleTooSmall(DataError):
    pass


# -- configuration -----------------------------------------------------------

class ConfigError(DataError):
    pass
