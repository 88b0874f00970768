import math

import numpy as np
import pytest

from frechet_forest.balls import BallMethod, OobErrorSet, PredictionBall, ball_volume, boundary_sample, \
    compute_oob_errors, conformal_quantile, empirical_quantile, fit_split_conformal, gaussian_radius, oob_ball, \
    order_statistic_quantile, population_ball, spheroid_ball_area, split_conformal_ball
from frechet_forest.dataset import Dataset
from frechet_forest.errors import ConfigurationError, FitError, UnsupportedSpaceError
from frechet_forest.forest import Flavor, ForestHyperparameters, fit_forest
from frechet_forest.metric import SpaceDescriptor, space_for
from frechet_forest.sampling import RngStream
from frechet_forest.scenarios import ScenarioSpec, build_scenario, generate_scenario


def _ball(text, center, radius, alpha=0.1):
    return PredictionBall(np.asarray(center, dtype=float), radius, SpaceDescriptor.parse(text), BallMethod.OOB, alpha)


data = []

data += [(np.arange(1., 11.), 0.1, 9.)]
data += [(np.arange(1., 11.), 0.5, 5.)]
data += [(np.arange(1., 11.), 0.999, 1.)]
data += [(np.full(7, 2.5), 0.3, 2.5)]
data += [(np.array([4., 1., 3., 2.]), 0.25, 3.)]


@pytest.mark.parametrize("errors, alpha, answer", data)
def test_order_statistic_quantile(errors, alpha, answer):
    """
    Test the ``ceil((1 - alpha) k)``-th order statistic

    :param np.ndarray errors: The errors
    :param float alpha: The significance level
    :param float answer: The expected quantile
    """

    assert order_statistic_quantile(errors, alpha) == answer
    assert empirical_quantile(OobErrorSet(errors, np.arange(errors.size), np.array([], dtype=int)), alpha) == answer


def test_uniform_quantile(stream):
    """
    Test that the order statistic of many uniform errors concentrates at ``1 - alpha``
    """

    assert order_statistic_quantile(stream.random(100000), 0.05) == pytest.approx(0.95, abs=0.01)


data = []

data += [(np.arange(1., 10.), 0.1, 9.)]
data += [(np.arange(1., 10.), 0.05, math.inf)]
data += [(np.arange(1., 20.), 0.1, 18.)]
data += [(np.zeros(5), 0.2, 0.)]


@pytest.mark.parametrize("residuals, alpha, answer", data)
def test_conformal_quantile(residuals, alpha, answer):
    """
    Test the ``ceil((1 - alpha)(k + 1))``-th order statistic and its infinite overflow

    :param np.ndarray residuals: The calibration residuals
    :param float alpha: The significance level
    :param float answer: The expected radius
    """

    assert conformal_quantile(residuals, alpha) == answer


def test_quantile_errors():
    """
    Test that empty error sets and levels outside ``(0, 1)`` are rejected
    """

    with pytest.raises(FitError):
        order_statistic_quantile([], 0.1)
    with pytest.raises(ConfigurationError):
        order_statistic_quantile([1., 2.], 1.)
    with pytest.raises(ConfigurationError):
        conformal_quantile([1., 2.], 0.)


def test_strict_membership():
    """
    Test that points at exactly the radius are outside the ball
    """

    ball = _ball("euclidean:2", [0., 0.], 5.)

    assert ball.contains(np.array([3., 3.99]))
    assert not ball.contains(np.array([3., 4.]))
    assert np.array_equal(ball.contains(np.array([[0., 0.], [0., 5.], [6., 0.]])), [True, False, False])
    assert _ball("euclidean:2", [0., 0.], math.inf).contains(np.array([1e300, 0.]))
    assert not _ball("euclidean:2", [0., 0.], 0.).contains(np.array([0., 0.]))


def test_ball_record():
    """
    Test the flat record of a ball
    """

    record = _ball("sphere:3", [0., 0., 1.], 0.5, alpha=0.05).record()

    assert record == {"method": "oob", "alpha": 0.05, "radius": 0.5, "descriptor": "sphere:3", "c_1": 0.,
                      "c_2": 0., "c_3": 1.}


data = []

data += [(dict(radius=-1.))]
data += [(dict(alpha=0.))]
data += [(dict(alpha=1.))]


@pytest.mark.parametrize("kwargs", data)
def test_bad_balls(kwargs):
    """
    Test that negative radii and significance levels outside ``(0, 1)`` are rejected

    :param dict kwargs: Ball fields overriding valid defaults
    """

    fields = dict(radius=1., alpha=0.1)
    fields.update(kwargs)

    with pytest.raises(ConfigurationError):
        _ball("euclidean:1", [0.], fields["radius"], fields["alpha"])


def test_oob_errors(euclidean_forest):
    """
    Test that every observation contributes one nonnegative error or is dropped
    """

    errors = compute_oob_errors(euclidean_forest)

    assert len(errors) + errors.dropped.size == euclidean_forest.n
    assert np.all(errors.errors >= 0.)
    expected = np.abs(errors.predictions[:, 0] - euclidean_forest.training.responses[errors.indices, 0])
    assert np.allclose(errors.errors, expected)


def test_oob_errors_large_forest():
    """
    Test that a large forest drops no observation and that constant responses have zero errors
    """

    dataset, _ = generate_scenario(ScenarioSpec("euclidean_linear", n=100), RngStream(90))
    constant = Dataset(dataset.predictor_descriptor, dataset.response_descriptor, dataset.predictors,
                       np.ones_like(dataset.responses))

    errors = compute_oob_errors(fit_forest(constant, Flavor.RFWLCFR, ForestHyperparameters(n_trees=200), rng=91))

    assert errors.dropped.size == 0
    assert np.all(errors.errors == 0.)


def test_oob_ball(euclidean_forest, euclidean_dataset):
    """
    Test the center, the membership of the center and the monotonicity of the radius in alpha
    """

    x = euclidean_dataset.predictor(3)
    errors = compute_oob_errors(euclidean_forest)

    balls = [oob_ball(euclidean_forest, x, alpha, errors) for alpha in (0.05, 0.1, 0.2, 0.5)]

    assert all(ball.method is BallMethod.OOB for ball in balls)
    assert balls[0].contains(balls[0].center)
    radii = [ball.radius for ball in balls]
    assert radii == sorted(radii, reverse=True)
    assert oob_ball(euclidean_forest, x, 0.999, errors).radius == errors.errors.min()
    assert oob_ball(euclidean_forest, x, 0.1).radius == radii[1]


def test_in_sample_oob_ball(euclidean_forest):
    """
    Test the experimental in-sample ball built from doubly out-of-bag errors
    """

    i = int(np.flatnonzero(euclidean_forest.bootstrap_counts[0] == 0)[0])

    ball = oob_ball(euclidean_forest, None, 0.1, in_sample_index=i)

    assert ball.method is BallMethod.IN_SAMPLE_OOB
    assert np.isfinite(ball.radius)


def test_split_conformal(euclidean_dataset):
    """
    Test the half split, the residual count and the infinite radius at small calibration sets
    """

    fit = fit_split_conformal(euclidean_dataset, Flavor.RFWLCFR, ForestHyperparameters(n_trees=10), rng=92)

    assert fit.train_indices.size == 30
    assert fit.residuals.size == 30
    assert np.array_equal(np.sort(np.concatenate([fit.train_indices, fit.calibration_indices])), np.arange(60))
    ball = fit.ball(euclidean_dataset.predictor(0), 0.1)
    assert ball.method is BallMethod.SPLIT_CONFORMAL
    assert ball.radius == conformal_quantile(fit.residuals, 0.1)
    assert math.isinf(fit.ball(euclidean_dataset.predictor(0), 0.01).radius)


def test_split_conformal_constant():
    """
    Test that constant responses give a zero conformal radius
    """

    dataset, _ = generate_scenario(ScenarioSpec("euclidean_linear", n=20), RngStream(93))
    constant = Dataset(dataset.predictor_descriptor, dataset.response_descriptor, dataset.predictors,
                       np.zeros_like(dataset.responses))

    ball = split_conformal_ball(constant, constant.predictor(0), 0.2, hyperparameters=ForestHyperparameters(5))

    assert ball.radius == 0.


def test_split_conformal_too_small():
    """
    Test that fewer than four observations are rejected
    """

    dataset, _ = generate_scenario(ScenarioSpec("euclidean_linear", n=3), RngStream(94))

    with pytest.raises(FitError):
        fit_split_conformal(dataset)


@pytest.mark.slow
def test_split_conformal_validity():
    """
    Test finite-sample marginal coverage of split-conformal balls on exchangeable data
    """

    spec = ScenarioSpec("euclidean_linear", n=51)
    stream = RngStream(95)
    covered = []
    for r in range(300):
        dataset, _ = generate_scenario(spec, stream.spawn(r, 0))
        train, test = dataset.subset(np.arange(50)), dataset.subset([50])
        ball = split_conformal_ball(train, test.predictor(0), 0.1, hyperparameters=ForestHyperparameters(20),
                                    rng=stream.spawn(r, 1))
        covered.append(ball.contains(test.responses[0]))

    coverage = np.mean(covered)
    assert coverage >= 0.9 - 3. * math.sqrt(0.09 / len(covered))


data = []

data += [(1, 1., 0.1, 1.6449)]
data += [(2, 1., 0.05, math.sqrt(-2. * math.log(0.05)))]
data += [(1, 2., 0.1, 3.2897)]


@pytest.mark.parametrize("q, sigma, alpha, answer", data)
def test_gaussian_radius(q, sigma, alpha, answer):
    """
    Test the radial quantile of isotropic Gaussian errors

    :param int q: The dimension
    :param float sigma: The noise standard deviation
    :param float alpha: The significance level
    :param float answer: The expected radius
    """

    assert gaussian_radius(q, sigma, alpha) == pytest.approx(answer, abs=1e-4)


def test_population_ball():
    """
    Test population balls in closed form and their shrinkage with the concentration
    """

    spec = ScenarioSpec("euclidean_linear", sigma=1.)
    x = build_scenario(spec).default_x0()

    ball = population_ball(spec, x, 0.1)

    assert ball.radius == pytest.approx(1.6449, abs=1e-4)
    assert ball.method is BallMethod.POPULATION
    assert np.allclose(ball.center, x[0][0] - x[1][0] + x[2][0])
    sphere = [population_ball(ScenarioSpec("sphere_great_circle", kappa=kappa), (np.array([[1., 0.]]),), 0.1)
              for kappa in (50., 200.)]
    assert sphere[1].radius < sphere[0].radius


def test_population_ball_simulated():
    """
    Test the simulated radius of a scenario without a closed form against an independent simulation
    """

    spec = ScenarioSpec("euclidean_multivariate", q=2)
    scenario = build_scenario(spec)
    x = scenario.default_x0()

    ball = population_ball(spec, x, 0.1, rng=96, n_draws=50000)

    errors = scenario.sample_errors(x, 50000, RngStream(97))
    assert np.mean(errors < ball.radius) == pytest.approx(0.9, abs=0.01)


def test_population_ball_unsupported():
    """
    Test that scenarios without a population error law are rejected
    """

    spec = ScenarioSpec("sphere_anisotropic")

    with pytest.raises(UnsupportedSpaceError):
        population_ball(spec, build_scenario(spec).default_x0(), 0.1)


data = []

data += [(_ball("euclidean:1", [0.], 2.), 4.)]
data += [(_ball("euclidean:2", [0., 0.], 1.), math.pi)]
data += [(_ball("euclidean:3", [0., 0., 0.], 1.), 4. / 3. * math.pi)]
data += [(_ball("sphere:3", [0., 0., 1.], math.pi), 4. * math.pi)]
data += [(_ball("sphere:3", [0., 0., 1.], 4.), 4. * math.pi)]
data += [(_ball("sphere:3", [0., 0., 1.], 0.5 * math.pi), 2. * math.pi)]


@pytest.mark.parametrize("ball, answer", data)
def test_ball_volume(ball, answer):
    """
    Test ball volumes with known values

    :param PredictionBall ball: The ball
    :param float answer: The expected volume
    """

    assert ball_volume(ball) == pytest.approx(answer)


def test_ball_volume_unsupported():
    """
    Test that volumes are refused on spaces without a volume formula
    """

    with pytest.raises(UnsupportedSpaceError):
        ball_volume(_ball("hyperboloid:3", [1., 0., 0.], 1.))


data = []

data += [(1., 1., 0.7)]
data += [(0.5, 1., 0.4)]
data += [(1., 0.5, 0.4)]


@pytest.mark.parametrize("a, c, radius", data)
def test_spheroid_area(a, c, radius):
    """
    Test the Monte Carlo area of spheroid-induced balls against the sphere cap and the distance bounds

    :param float a: The equatorial semi-axis
    :param float c: The polar semi-axis
    :param float radius: The ball radius
    """

    center = np.array([0.6, 0., 0.8])

    area, standard_error = spheroid_ball_area(center, radius, a, c, rng=98, n_draws=100000)

    inner = 2. * math.pi * (1. - math.cos(radius / max(a, c)))
    outer = 2. * math.pi * (1. - math.cos(radius / min(a, c)))
    assert inner - 4. * standard_error <= area <= outer + 4. * standard_error
    if a == c:
        assert area == pytest.approx(inner, abs=4. * standard_error + 1e-12)


data = []

data += [("euclidean:1", [2.], 0.5)]
data += [("euclidean:2", [1., -1.], 2.)]
data += [("euclidean:4", [0., 0., 0., 0.], 1.5)]
data += [("sphere:3", [0.6, 0., 0.8], 0.3)]
data += [("sphere:4", [1., 0., 0., 0.], 0.3)]
data += [("hyperboloid:3", [math.cosh(0.5), math.sinh(0.5), 0.], 0.4)]
data += [("spd:2:ai", np.array([[2., 0.3], [0.3, 1.]]), 0.5)]
data += [("spd:2:le", np.eye(2), 0.5)]


@pytest.mark.parametrize("text, center, radius", data)
def test_boundary_sample(text, center, radius):
    """
    Test that boundary points lie at the radius from the center

    :param str text: The descriptor text
    :param center: The ball center
    :param float radius: The ball radius
    """

    ball = _ball(text, center, radius)

    points = boundary_sample(ball, count=16, rng=99)

    assert len(points) == 16
    space = space_for(ball.descriptor)
    space.validate(points)
    assert np.allclose(space.distances(ball.center, points), radius, rtol=0., atol=1e-9)


def test_spheroid_boundary():
    """
    Test that bisection places spheroid boundary points at the radius
    """

    ball = _ball("spheroid:0.5:1", [0.6, 0., 0.8], 0.4)

    points = boundary_sample(ball, count=8)

    assert np.allclose(space_for(ball.descriptor).distances(ball.center, points), 0.4, rtol=0., atol=1e-6)


data = []

data += [(_ball("euclidean:1", [0.], math.inf), ConfigurationError)]
data += [(_ball("sphere:3", [0., 0., 1.], 4.), ConfigurationError)]
data += [(_ball("quantile:3", [0., 1., 2.], 1.), UnsupportedSpaceError)]


@pytest.mark.parametrize("ball, error", data)
def test_boundary_unsupported(ball, error):
    """
    Test that infinite balls, whole-sphere balls and quantile grids have no boundary sample

    :param PredictionBall ball: The ball
    :param type error: The expected exception
    """

    with pytest.raises(error):
        boundary_sample(ball)
