"""Exception hierarchy.

Errors are grouped by the CLI exit code they map to: configuration problems
(2), bad input data (3) and numerical failures (4).
"""


class LoadSplitError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class ConfigError(LoadSplitError):
    exit_code = 2


class DataError(LoadSplitError, ValueError):
    exit_code = 3


class NumericalError(LoadSplitError, ArithmeticError):
    exit_code = 4


# -- ingestion / curves -------------------------------------------------------


class MalformedRow(DataError):
    pass


class NonMonotonicTime(DataError):
    pass


class NegativeLoad(DataError):
    pass


class IncompleteDay(DataError):
    pass


class ZeroEnergyDay(DataError):
    pass


class PeriodMismatch(DataError):
    pass


class ZeroTotal(DataError):
    pass


# -- constraints --------------------------------------------------------------


class EmptyMonth(DataError):
    pass


class NotSurjective(DataError):
    pass


class MultiAssignment(DataError):
    pass


class ZeroIndicatorColumn(DataError):
    pass


class MissingMonth(DataError):
    pass


# -- solver / ensemble / nowcast ----------------------------------------------


class DimensionMismatch(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class DegenerateData(DataError):
    pass


class InsufficientMonths(DataError):
    pass


class NonFiniteEntry(NumericalError):
    pass


class Diverged(NumericalError):
    pass


class EmptyCluster(NumericalError):
    pass


class RankDeficientSources(NumericalError):
    pass


class InvalidSpec(ConfigError):
    pass
