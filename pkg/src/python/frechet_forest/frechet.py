"""Weighted Fréchet means, variances and medoids

The weighted Fréchet functional of a sample ``(Y_i, w_i)`` at ``y`` is ``sum_i w_i d(Y_i, y)^2 / sum_i w_i``.
Weights are normalized internally so callers can pass raw counts.

Means are computed in closed form where the geometry is flat (Euclidean, quantile grids, log-Cholesky and
log-Euclidean SPD metrics) and by the intrinsic fixed-point iteration

    x <- exp_x( sum_i w_i log_x(Y_i) / sum_i w_i )

on the sphere, the hyperboloid and the affine-invariant SPD metric.
"""

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DescriptorMismatchError, FitError, UnsupportedSpaceError
from .metric import MetricPoint, space_for

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 200
TOLERANCE = 1e-9
MAX_INITIAL_CANDIDATES = 256


class SolveMethod(enum.Enum):
    CLOSED_FORM = "closed_form"
    GRADIENT_DESCENT = "gradient_descent"
    MEDOID = "medoid"


@dataclass(frozen=True)
class WeightedSample:
    """A stack of points of one space with raw nonnegative weights

    :param Space space: The space of the points
    :param np.ndarray points: The stacked points, shape ``(n, *space.shape)``
    :param np.ndarray weights: The weights, shape ``(n,)``; defaults to equal weights
    """

    space: object
    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == len(self.space.shape):
            points = points[None, ...]
        weights = np.ones(len(points)) if self.weights is None else np.asarray(self.weights, dtype=float)
        if weights.shape != (len(points),):
            raise FitError(f"{len(points)} points but {weights.size} weights")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_points(cls, points, weights=None):
        """Build a sample from a list of :class:`MetricPoint` sharing one descriptor"""
        if len(points) == 0:
            raise FitError("the sample is empty")
        descriptor = points[0].descriptor
        space = space_for(descriptor)
        stacked = np.stack([space.unflatten(point.data[None, :])[0] for point in points])
        if any(point.descriptor != descriptor for point in points):
            raise DescriptorMismatchError("sample points live on different spaces")
        return cls(space, stacked, weights)

    def __len__(self):
        return len(self.points)

    def normalized_weights(self):
        """The weights divided by their total, after checking they form a valid sample"""
        if len(self) == 0:
            raise FitError("the sample is empty")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise FitError("weights must be finite and nonnegative")
        total = self.weights.sum()
        if not total > 0:
            raise FitError("the sample has no positive weight")
        return self.weights / total

    def support(self):
        """Restriction to the points with nonzero weight"""
        keep = np.flatnonzero(self.weights != 0)
        if keep.size == len(self):
            return self
        return WeightedSample(self.space, self.points[keep], self.weights[keep])


@dataclass(frozen=True)
class FrechetSolveReport:
    """Result of a Fréchet mean or medoid computation

    :param np.ndarray minimizer: The minimizing point in the natural shape of the space
    :param float objective: The weighted Fréchet functional at the minimizer
    :param int iterations: Number of fixed-point iterations (0 for closed forms and medoids)
    :param bool converged: Whether the gradient norm dropped below the tolerance
    :param SolveMethod method: How the minimizer was obtained
    :param int index: Sample index of a medoid
    """

    minimizer: np.ndarray
    objective: float
    iterations: int
    converged: bool
    method: SolveMethod
    index: int = None

    def point(self, descriptor):
        return MetricPoint(descriptor, np.asarray(self.minimizer).reshape(-1))


def frechet_functional(sample, y):
    """Weighted Fréchet functional of ``sample`` at the point ``y``"""
    w = sample.normalized_weights()
    d = sample.space.distances(y, sample.points)
    return float(np.dot(w, d ** 2))


def _initial_index(sample, w):
    """Sample point with the smallest functional, searched over the heaviest points of large samples"""
    candidates = np.arange(len(sample))
    if len(sample) > MAX_INITIAL_CANDIDATES:
        candidates = np.sort(np.argsort(-w, kind="stable")[:MAX_INITIAL_CANDIDATES])
    values = [np.dot(w, sample.space.distances(sample.points[i], sample.points) ** 2) for i in candidates]
    return int(candidates[int(np.argmin(values))])


def frechet_mean(sample, max_iterations=MAX_ITERATIONS, tolerance=TOLERANCE):
    """Weighted Fréchet mean

    :param WeightedSample sample: The weighted sample
    :param int max_iterations: Iteration cap of the intrinsic fixed-point iteration
    :param float tolerance: Convergence threshold on the norm of the mean log vector

    :returns: A :class:`FrechetSolveReport`
    """
    sample.normalized_weights()
    sample = sample.support()
    w = sample.normalized_weights()
    space = sample.space

    if len(sample) == 1 or np.all(sample.points == sample.points[0]):
        return FrechetSolveReport(sample.points[0].copy(), 0., 0, True, SolveMethod.CLOSED_FORM)

    closed = space.closed_form_mean(sample.points, w)
    if closed is not None:
        return FrechetSolveReport(closed, frechet_functional(sample, closed), 0, True, SolveMethod.CLOSED_FORM)

    if not space.has_exp_log:
        raise UnsupportedSpaceError(f"Fréchet means are not available on {space.descriptor}; use medoids")

    x = sample.points[_initial_index(sample, w)].copy()
    gradient_norm = np.inf
    for iteration in range(max_iterations + 1):
        V = space.log(x, sample.points)
        gradient = np.tensordot(w, V, axes=1)
        gradient_norm = float(space.norm(x, gradient))
        if gradient_norm < tolerance:
            return FrechetSolveReport(x, frechet_functional(sample, x), iteration, True,
                                      SolveMethod.GRADIENT_DESCENT)
        if iteration == max_iterations:
            break
        x = space.exp(x, gradient)

    logger.debug("Karcher iteration on %s stopped after %d iterations with gradient norm %.3e",
                 space.descriptor, max_iterations, gradient_norm)
    return FrechetSolveReport(x, frechet_functional(sample, x), max_iterations, False, SolveMethod.GRADIENT_DESCENT)


def frechet_variance(sample, mean):
    """Weighted Fréchet variance about ``mean``

    :param WeightedSample sample: The weighted sample
    :param np.ndarray mean: A point of the sample's space
    """
    return frechet_functional(sample, np.asarray(mean, dtype=float))


def medoid_objectives(squared_distances, weights):
    """Weighted functionals of candidate points from their squared distances to the sample

    :param np.ndarray squared_distances: Shape ``(n_candidates, n)``
    :param np.ndarray weights: Normalized weights, shape ``(n,)``
    """
    return squared_distances @ weights


def frechet_medoid(sample, candidates=None, distance_matrix=None):
    """Weighted Fréchet medoid restricted to candidate sample points

    :param WeightedSample sample: The weighted sample
    :param candidates: Indices of the admissible points; defaults to every point
    :param np.ndarray distance_matrix: Optional ``(n, n)`` matrix of pairwise distances within the sample

    :returns: A :class:`FrechetSolveReport` whose ``index`` is the selected sample index
    """
    w = sample.normalized_weights()
    candidates = np.arange(len(sample)) if candidates is None else np.unique(np.asarray(candidates, dtype=int))
    if candidates.size == 0:
        raise FitError("the medoid candidate set is empty")
    support = np.flatnonzero(w)
    if distance_matrix is not None:
        D = np.asarray(distance_matrix)[np.ix_(candidates, support)]
    else:
        D = np.array([sample.space.distances(sample.points[c], sample.points[support]) for c in candidates])
    objectives = medoid_objectives(D ** 2, w[support])
    best = int(np.argmin(objectives))
    index = int(candidates[best])
    return FrechetSolveReport(sample.points[index].copy(), float(objectives[best]), 0, True, SolveMethod.MEDOID,
                              index=index)
