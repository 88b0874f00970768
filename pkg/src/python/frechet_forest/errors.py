"""Exceptions raised by frechet_forest

Every exception carries the exit code the command line interface returns when it escapes a subcommand.
"""


class FrechetForestError(Exception):
    """Base class of every frechet_forest error"""

    exit_code = 1


class ConfigurationError(FrechetForestError, ValueError):
    """Malformed configuration deck, descriptor text, or command line option"""

    exit_code = 2


class DataFormatError(ConfigurationError):
    """A CSV file that cannot be parsed into points"""


class InvalidPointError(FrechetForestError, ValueError):
    """A point violating the invariants of its space

    :param str message: The description of the violation
    :param int index: The 0-based index of the offending point in its batch, if known
    """

    exit_code = 3

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class FitError(FrechetForestError, RuntimeError):
    """Invalid hyperparameters or a failure while growing a forest"""

    exit_code = 4


class UnsupportedSpaceError(FrechetForestError, NotImplementedError):
    """An operation that is undefined for the requested space"""

    exit_code = 4


class DescriptorMismatchError(FrechetForestError, ValueError):
    """Points, models or queries living on different spaces"""

    exit_code = 5


class NoSplitError(FrechetForestError):
    """A node sample that admits no admissible split"""


class NoOobTreesError(FrechetForestError, LookupError):
    """An observation that is in-bag for every tree of the forest

    :param int index: The training index without out-of-bag trees
    """

    def __init__(self, index):
        super().__init__(f"Observation {index} is in-bag for every tree")
        self.index = index


class NonUniqueGeodesicError(FrechetForestError, ArithmeticError):
    """Log map requested between points joined by more than one minimizing geodesic"""


class GeodesicError(FrechetForestError, ArithmeticError):
    """Spheroid geodesic solver and its fallback both failed"""


class ValidationFailure(FrechetForestError, AssertionError):
    """A validation check outside its tolerance"""

    exit_code = 1
