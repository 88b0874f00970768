"""Random forests and prediction balls for responses in metric spaces"""

try:
    from ._version import version as __version__
except ImportError:
    __version__ = "0+unknown"

from .errors import (ConfigurationError, DataFormatError, DescriptorMismatchError, FitError, FrechetForestError,
                     InvalidPointError, UnsupportedSpaceError, ValidationFailure)
from .metric import SpaceDescriptor, space_for
from .dataset import Dataset, read_dataset, read_queries, write_dataset
from .forest import Flavor, ForestHyperparameters, fit_forest, predict, predict_one, tune_hyperparameters
from .balls import (BallMethod, PredictionBall, compute_oob_errors, fit_split_conformal, oob_ball,
                    split_conformal_ball)
