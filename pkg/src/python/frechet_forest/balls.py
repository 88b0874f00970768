"""Prediction balls

A prediction ball ``{y : d(center, y) < radius}`` is built around a forest prediction. Its radius is

* an order statistic of the out-of-bag radial errors ``d(Y_i, Yhat_(i))`` (``oob``),
* a conformal rank of held-out residuals from a forest fitted on half the sample (``split_conformal``),
* the ``(1 - alpha)`` quantile of ``d(Y, m(X))`` under a known scenario (``population``).
"""

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special, stats

from .errors import ConfigurationError, DescriptorMismatchError, FitError, NoOobTreesError, UnsupportedSpaceError
from .forest import Flavor, ForestHyperparameters, fit_forest, oob_predictions, predict, predict_one, \
    training_prediction, tune_hyperparameters
from .metric import MetricPoint, SpaceKind, space_for
from .sampling import as_stream, lorentz_boost
from .scenarios import build_scenario
from .spheroid import induced_sphere_distances

logger = logging.getLogger(__name__)

POPULATION_DRAWS = 10 ** 6
AREA_DRAWS = 10 ** 6
RANK_TOLERANCE = 1e-9
BISECTION_STEPS = 60


class BallMethod(enum.Enum):
    OOB = "oob"
    SPLIT_CONFORMAL = "split_conformal"
    POPULATION = "population"
    IN_SAMPLE_OOB = "in_sample_oob"


@dataclass(frozen=True)
class PredictionBall:
    """The open ball ``{y : d(center, y) < radius}``

    :param np.ndarray center: The center in the natural shape of the response space
    :param float radius: Nonnegative, possibly infinite
    :param SpaceDescriptor descriptor: The response space
    :param BallMethod method: How the radius was obtained
    :param float alpha: The significance level
    """

    center: np.ndarray
    radius: float
    descriptor: object
    method: BallMethod
    alpha: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ConfigurationError(f"ball radius must be nonnegative, got {self.radius}")
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def space(self):
        return space_for(self.descriptor)

    @property
    def center_point(self):
        return MetricPoint(self.descriptor, np.asarray(self.center).reshape(-1))

    def contains(self, y):
        """Strict membership of one point or a stack of points"""
        y = np.asarray(y, dtype=float)
        single = y.ndim == len(self.space.shape)
        inside = self.space.distances(self.center, y[None, ...] if single else y) < self.radius
        return bool(inside[0]) if single else inside

    def record(self):
        """Flat record for CSV output"""
        out = {"method": self.method.value, "alpha": self.alpha, "radius": self.radius,
               "descriptor": str(self.descriptor)}
        for k, value in enumerate(np.asarray(self.center).reshape(-1)):
            out[f"c_{k + 1}"] = value
        return out


def _rank(level, count):
    """``ceil(level * count)`` without promoting exact products by rounding"""
    return max(1, math.ceil(level * count - RANK_TOLERANCE))


def order_statistic_quantile(errors, alpha):
    """The ``ceil((1 - alpha) k)``-th smallest of ``k`` errors"""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise FitError("cannot take a quantile of an empty error set")
    if not 0 < alpha < 1:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    rank = _rank(1. - alpha, errors.size)
    return float(np.partition(errors, rank - 1)[rank - 1])


def conformal_quantile(residuals, alpha):
    """The ``ceil((1 - alpha)(k + 1))``-th smallest of ``k`` residuals, infinite when that rank exceeds ``k``"""
    residuals = np.asarray(residuals, dtype=float)
    if not 0 < alpha < 1:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    rank = _rank(1. - alpha, residuals.size + 1)
    if rank > residuals.size:
        return math.inf
    return float(np.partition(residuals, rank - 1)[rank - 1])


@dataclass(frozen=True)
class OobErrorSet:
    """Out-of-bag radial errors

    :param np.ndarray errors: ``d(Y_i, Yhat_(i))`` of the retained observations
    :param np.ndarray indices: The retained training indices
    :param np.ndarray dropped: Training indices without out-of-bag trees
    :param np.ndarray predictions: The out-of-bag predictions of the retained observations
    """

    errors: np.ndarray
    indices: np.ndarray
    dropped: np.ndarray
    predictions: np.ndarray = None

    def __len__(self):
        return len(self.errors)

    def radius(self, alpha):
        return empirical_quantile(self, alpha)


def compute_oob_errors(model, dataset=None):
    """Out-of-bag radial errors of every observation with at least one out-of-bag tree

    :param ForestModel model: The fitted forest
    :param Dataset dataset: The training sample; defaults to the one stored in the model

    :returns: An :class:`OobErrorSet`
    """
    dataset = model.training if dataset is None else dataset
    if dataset.n != model.n or dataset.response_descriptor != model.response_descriptor:
        raise DescriptorMismatchError("the dataset is not the one the forest was fitted on")
    indices, predictions = oob_predictions(model)
    if indices.size == 0:
        raise FitError("every observation is in-bag for every tree")
    dropped = np.setdiff1d(np.arange(model.n), indices)
    if dropped.size:
        logger.warning("dropped %d observations that are in-bag for every tree", dropped.size)
    space = model.response_space
    errors = np.array([space.distance(prediction, dataset.responses[i])
                       for i, prediction in zip(indices, predictions)])
    return OobErrorSet(errors, indices, dropped, predictions)


def empirical_quantile(errors, alpha):
    """The ``ceil((1 - alpha) k)``-th order statistic of the ``k`` retained errors

    :param errors: An :class:`OobErrorSet` or an array of errors
    :param float alpha: The significance level in ``(0, 1)``
    """
    values = errors.errors if isinstance(errors, OobErrorSet) else errors
    return order_statistic_quantile(values, alpha)


def doubly_oob_errors(model, i, min_trees=1):
    """Radial errors of the other observations computed on the trees that leave out both ``i`` and them

    Observations sharing fewer than ``min_trees`` out-of-bag trees with ``i`` are skipped.
    """
    oob_i = set(model.oob_trees(i).tolist())
    errors = []
    for j in range(model.n):
        if j == i:
            continue
        shared = sorted(oob_i.intersection(model.oob_trees(j).tolist()))
        if len(shared) < min_trees:
            continue
        prediction = training_prediction(model, j, shared, exclude=[i, j])
        errors.append(model.response_space.distance(prediction, model.training.responses[j]))
    return np.array(errors)


def oob_ball(model, x, alpha, errors=None, in_sample_index=None, min_trees=1):
    """Out-of-bag prediction ball

    :param ForestModel model: The fitted forest
    :param x: The query as a list of single-point predictor blocks
    :param float alpha: The significance level
    :param OobErrorSet errors: Precomputed out-of-bag errors of ``model``
    :param int in_sample_index: Experimental: build the ball at training observation ``i`` instead of ``x``,
        centered at its out-of-bag prediction with the radius taken from doubly out-of-bag errors
    :param int min_trees: Minimum number of shared out-of-bag trees in the experimental mode

    :returns: A :class:`PredictionBall`
    """
    if in_sample_index is not None:
        i = int(in_sample_index)
        trees = model.oob_trees(i)
        if trees.size == 0:
            raise NoOobTreesError(i)
        center = training_prediction(model, i, trees, exclude=[i])
        radius = order_statistic_quantile(doubly_oob_errors(model, i, min_trees), alpha)
        return PredictionBall(center, radius, model.response_descriptor, BallMethod.IN_SAMPLE_OOB, alpha)
    errors = compute_oob_errors(model) if errors is None else errors
    return PredictionBall(predict_one(model, x), empirical_quantile(errors, alpha), model.response_descriptor,
                          BallMethod.OOB, alpha)


@dataclass(eq=False)
class SplitConformalFit:
    """A forest fitted on one half of the sample and its residuals on the other half"""

    model: object
    residuals: np.ndarray
    train_indices: np.ndarray
    calibration_indices: np.ndarray

    def radius(self, alpha):
        return conformal_quantile(self.residuals, alpha)

    def ball(self, x, alpha):
        radius = self.radius(alpha)
        if math.isinf(radius):
            logger.info("conformal rank exceeds %d residuals at alpha=%g; the ball is the whole space",
                        self.residuals.size, alpha)
        return PredictionBall(predict_one(self.model, x), radius, self.model.response_descriptor,
                              BallMethod.SPLIT_CONFORMAL, alpha)


def fit_split_conformal(dataset, flavor=Flavor.RFWLCFR, hyperparameters=None, rng=0, n_jobs=1, tune=False):
    """Fit a forest on a random ``floor(n/2)`` half and compute residuals on the remaining ``ceil(n/2)``

    With ``tune`` the hyperparameters are cross-validated on the training half only, keeping the calibration half
    exchangeable with new observations.
    """
    if dataset.n < 4:
        raise FitError(f"split-conformal balls need at least 4 observations, got {dataset.n}")
    stream = as_stream(rng)
    permutation = stream.spawn(0).permutation(dataset.n)
    train, calibration = np.sort(permutation[:dataset.n // 2]), np.sort(permutation[dataset.n // 2:])
    hyperparameters = hyperparameters or ForestHyperparameters()
    if tune:
        hyperparameters = tune_hyperparameters(dataset.subset(train), flavor, rng=stream.spawn(2),
                                               base=hyperparameters, n_jobs=n_jobs)
    model = fit_forest(dataset.subset(train), flavor, hyperparameters, stream.spawn(1), n_jobs)
    held_out = dataset.subset(calibration)
    predictions = predict(model, held_out.predictors)
    space = dataset.response_space
    residuals = np.array([space.distance(p, y) for p, y in zip(predictions, held_out.responses)])
    return SplitConformalFit(model, residuals, train, calibration)


def split_conformal_ball(dataset, x, alpha, flavor=Flavor.RFWLCFR, hyperparameters=None, rng=0, n_jobs=1):
    """Split-conformal prediction ball at ``x``

    :returns: A :class:`PredictionBall` whose radius is infinite when the conformal rank exceeds the calibration
        size
    """
    return fit_split_conformal(dataset, flavor, hyperparameters, rng, n_jobs).ball(x, alpha)


def gaussian_radius(q, sigma, alpha):
    """``(1 - alpha)`` quantile of ``|eps|`` for ``eps ~ N(0, sigma^2 I_q)``"""
    return float(sigma * stats.chi.ppf(1. - alpha, q))


def population_ball(spec, x, alpha, rng=0, n_draws=POPULATION_DRAWS):
    """The population ball ``{y : d(m(x), y) < R_(1-alpha)}`` of a scenario

    The radius is the closed-form quantile of ``d(Y, m(X))`` when the scenario has one and a Monte Carlo quantile
    from ``n_draws`` conditional draws otherwise.

    :param ScenarioSpec spec: The scenario
    :param x: Single-row predictor blocks
    :param float alpha: The significance level
    """
    scenario = build_scenario(spec)
    if not scenario.has_population_law:
        raise UnsupportedSpaceError(f"the {spec.name.value} scenario has no population error law")
    x = tuple(np.asarray(block, dtype=float)[:1] for block in x)
    center = scenario.regression(x)[0]
    radius = scenario.population_radius(alpha)
    if radius is None:
        radius = order_statistic_quantile(scenario.sample_errors(x, n_draws, as_stream(rng)), alpha)
    return PredictionBall(center, radius, scenario.response_descriptor, BallMethod.POPULATION, alpha)


def _unit_ball_volume(q):
    return math.pi ** (q / 2.) / special.gamma(q / 2. + 1.)


def _tangent_plane(center):
    """Orthonormal basis of the tangent plane of the unit sphere in R^3 at ``center``"""
    return linalg.null_space(np.asarray(center, dtype=float)[None, :]).T


def spheroid_ball_area(center, radius, a, c, rng=0, n_draws=AREA_DRAWS):
    """Monte Carlo area of a spheroid-induced ball on the unit sphere

    Draws are uniform in the geodesic cap that surely contains the ball. Only the annulus where the bounds
    ``min(a, c) theta <= d <= max(a, c) theta`` disagree is resolved with the induced distance.

    :returns: ``(area, standard_error)``
    """
    if math.isinf(radius) or radius / min(a, c) >= math.pi:
        outer = math.pi
    else:
        outer = radius / min(a, c)
    cap = 2. * math.pi * (1. - math.cos(outer))
    if radius == 0:
        return 0., 0.
    rng = as_stream(rng)
    cos_theta = rng.uniform(math.cos(outer), 1., size=n_draws)
    psi = rng.uniform(0., 2. * math.pi, size=n_draws)
    theta = np.arccos(np.clip(cos_theta, -1., 1.))
    e1, e2 = _tangent_plane(center)
    points = (np.cos(theta)[:, None] * center + np.sin(theta)[:, None]
              * (np.cos(psi)[:, None] * e1 + np.sin(psi)[:, None] * e2))
    inside = theta * max(a, c) < radius
    unresolved = ~inside & (theta * min(a, c) < radius)
    if unresolved.any():
        inside[unresolved] = induced_sphere_distances(center, points[unresolved], a, c) < radius
    fraction = inside.mean()
    return cap * fraction, cap * math.sqrt(fraction * (1. - fraction) / n_draws)


def ball_volume(ball, rng=0, n_draws=AREA_DRAWS):
    """Volume (or area) of a ball

    Euclidean balls have volume ``V_q r^q``, balls on the 2-sphere are caps of area ``2 pi (1 - cos r)`` and
    spheroid-induced balls are measured by :func:`spheroid_ball_area`.
    """
    descriptor = ball.descriptor
    r = ball.radius
    if descriptor.kind is SpaceKind.EUCLIDEAN:
        return math.inf if math.isinf(r) else _unit_ball_volume(descriptor.dim) * r ** descriptor.dim
    if descriptor.kind is SpaceKind.SPHERE and descriptor.dim == 3:
        return 2. * math.pi * (1. - math.cos(min(r, math.pi)))
    if descriptor.kind is SpaceKind.SPHEROID:
        return spheroid_ball_area(np.asarray(ball.center, dtype=float), r, descriptor.a, descriptor.c, rng,
                                  n_draws)[0]
    raise UnsupportedSpaceError(f"ball volumes are not available on {descriptor}")


def _circle_tangents(space, center, count, rng):
    """Unit tangent vectors at ``center``: evenly spaced on 2-D tangent planes, random otherwise"""
    kind = space.descriptor.kind
    if space.descriptor.dim == 3 and kind in (SpaceKind.SPHERE, SpaceKind.HYPERBOLOID):
        if kind is SpaceKind.SPHERE:
            e1, e2 = _tangent_plane(center)
        else:
            boost = lorentz_boost(center)
            e1, e2 = boost[:, 1], boost[:, 2]
        angles = 2. * math.pi * np.arange(count) / count
        return np.cos(angles)[:, None] * e1 + np.sin(angles)[:, None] * e2
    return np.stack([space.random_tangent(center, rng) for _ in range(count)])


def _spheroid_boundary(ball, count):
    a, c = ball.descriptor.a, ball.descriptor.c
    center = np.asarray(ball.center, dtype=float)
    e1, e2 = _tangent_plane(center)
    angles = 2. * math.pi * np.arange(count) / count
    directions = np.cos(angles)[:, None] * e1 + np.sin(angles)[:, None] * e2

    def ray(theta):
        return np.cos(theta)[:, None] * center + np.sin(theta)[:, None] * directions

    lo = np.full(count, ball.radius / max(a, c))
    hi = np.full(count, min(math.pi, ball.radius / min(a, c)))
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        inside = induced_sphere_distances(center, ray(mid), a, c) < ball.radius
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return ray(0.5 * (lo + hi))


def boundary_sample(ball, count=64, rng=0):
    """Points at distance ``radius`` from the center, for plotting ball boundaries

    Euclidean boundaries are spheres; on the sphere, the hyperboloid and SPD matrices boundary points are exp-map
    images of tangent vectors of length ``radius``; spheroid-induced boundaries are found by bisection along great
    circle rays.

    :returns: A stack of ``count`` points
    """
    if math.isinf(ball.radius):
        raise ConfigurationError("an infinite ball has no boundary")
    space = ball.space
    rng = as_stream(rng)
    center = np.asarray(ball.center, dtype=float)
    kind = ball.descriptor.kind
    if kind is SpaceKind.SPHEROID:
        return _spheroid_boundary(ball, count)
    if kind is SpaceKind.EUCLIDEAN:
        q = ball.descriptor.dim
        if q == 1:
            directions = np.where(np.arange(count) % 2 == 0, 1., -1.)[:, None]
        elif q == 2:
            angles = 2. * math.pi * np.arange(count) / count
            directions = np.column_stack([np.cos(angles), np.sin(angles)])
        else:
            directions = rng.standard_normal((count, q))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        return center + ball.radius * directions
    if kind is SpaceKind.SPHERE and ball.radius > math.pi:
        raise ConfigurationError(f"a ball of radius {ball.radius} > pi covers the whole sphere")
    if not space.has_exp_log or kind is SpaceKind.QUANTILE:
        raise UnsupportedSpaceError(f"boundary sampling is not available on {ball.descriptor}")
    tangents = _circle_tangents(space, center, count, rng)
    return np.stack([space.exp(center, ball.radius * v) for v in tangents])
