import math

import numpy as np
import pytest

from frechet_forest.errors import FitError, UnsupportedSpaceError
from frechet_forest.frechet import SolveMethod, WeightedSample, frechet_functional, frechet_mean, frechet_medoid, \
    frechet_variance
from frechet_forest.metric import MetricPoint, SpaceDescriptor, space_for
from frechet_forest.sampling import RngStream, sample_hvmf, sample_vmf, sample_wishart


def _space(text):
    return space_for(SpaceDescriptor.parse(text))


data = []

data += [("euclidean:1", [[0.], [2.]], None, [1.])]
data += [("euclidean:1", [[0.], [2.]], [3., 1.], [0.5])]
data += [("euclidean:2", [[1., 1.], [3., -1.], [2., 3.]], [1., 1., 2.], [2., 1.5])]
data += [("quantile:3", [[0., 1., 2.], [2., 3., 4.]], None, [1., 2., 3.])]
data += [("sphere:3", [[0., 0., 1.]], None, [0., 0., 1.])]


@pytest.mark.parametrize("text, points, weights, answer", data)
def test_closed_form_mean(text, points, weights, answer):
    """
    Test weighted means with known values

    :param str text: The descriptor text
    :param list points: The sample points
    :param list weights: The raw weights
    :param list answer: The expected mean
    """

    sample = WeightedSample(_space(text), np.array(points), weights)

    report = frechet_mean(sample)

    assert np.allclose(report.minimizer, answer)
    assert report.method is SolveMethod.CLOSED_FORM
    assert report.converged
    assert np.isclose(report.objective, frechet_functional(sample, report.minimizer), atol=1e-10)


def test_single_point_objective():
    """
    Test that a single point is its own mean with zero objective
    """

    S = np.array([[2., 0.3], [0.3, 1.]])

    report = frechet_mean(WeightedSample(_space("spd:2:ai"), S[None, ...]))

    assert np.allclose(report.minimizer, S)
    assert report.objective == 0.


def test_from_points():
    """
    Test building a sample from tagged points
    """

    descriptor = SpaceDescriptor.parse("euclidean:1")
    points = [MetricPoint(descriptor, [0.]), MetricPoint(descriptor, [2.])]

    report = frechet_mean(WeightedSample.from_points(points))

    assert np.allclose(report.point(descriptor).data, [1.])


data = []

data += [(np.array([0., 0., 1.]), 50., 2000, 0.05)]
data += [(np.array([1., 1., 0.]) / math.sqrt(2.), 200., 2000, 0.02)]


@pytest.mark.parametrize("mu, kappa, n, tolerance", data)
def test_sphere_mean(mu, kappa, n, tolerance):
    """
    Test the Karcher mean of von Mises-Fisher draws against the location

    :param np.ndarray mu: The location
    :param float kappa: The concentration
    :param int n: The number of draws
    :param float tolerance: The accepted geodesic distance
    """

    space = _space("sphere:3")
    points = sample_vmf(mu, kappa, RngStream(31), size=n)

    report = frechet_mean(WeightedSample(space, points))

    assert report.converged
    assert report.method is SolveMethod.GRADIENT_DESCENT
    assert space.distance(report.minimizer, mu) < tolerance


def test_hyperboloid_mean():
    """
    Test the Karcher mean of hyperbolic von Mises-Fisher draws against the location
    """

    space = _space("hyperboloid:3")
    mu = np.array([math.cosh(0.4), 0., math.sinh(0.4)])
    points = sample_hvmf(mu, 50., RngStream(32), size=3000)

    report = frechet_mean(WeightedSample(space, points))

    assert report.converged
    assert space.distance(report.minimizer, mu) < 0.05


data = []

data += [("sphere:3")]
data += [("hyperboloid:3")]
data += [("spd:2:ai")]


@pytest.mark.parametrize("text", data)
def test_mean_optimality(text):
    """
    Test that no small perturbation of an iterative mean lowers the weighted functional

    :param str text: The descriptor text
    """

    space = _space(text)
    stream = RngStream(33)
    if text.startswith("sphere"):
        points = sample_vmf(np.array([1., 0., 0.]), 5., stream, size=60)
    elif text.startswith("hyperboloid"):
        points = sample_hvmf(np.array([1., 0., 0.]), 5., stream, size=60)
    else:
        points = sample_wishart(5., np.eye(2), stream, size=60)
    sample = WeightedSample(space, points, stream.random(60) + 0.1)

    report = frechet_mean(sample)

    assert report.converged
    for _ in range(100):
        perturbed = space.exp(report.minimizer, 1e-3 * space.random_tangent(report.minimizer, stream))
        assert frechet_functional(sample, perturbed) >= report.objective - 1e-12


data = []

data += [([[-1.], [1.]], [0.], 1.)]
data += [([[3.], [3.], [3.]], [3.], 0.)]
data += [([[0.], [2.]], [0.], 2.)]


@pytest.mark.parametrize("points, mean, answer", data)
def test_variance(points, mean, answer):
    """
    Test Fréchet variances with known values

    :param list points: The sample
    :param list mean: The point the variance is taken about
    :param float answer: The expected variance
    """

    sample = WeightedSample(_space("euclidean:1"), np.array(points))

    assert np.isclose(frechet_variance(sample, mean), answer)


@pytest.mark.slow
def test_sphere_variance():
    """
    Test the Fréchet variance of a concentrated vMF sample against an independent Monte Carlo estimate
    """

    space = _space("sphere:3")
    mu = np.array([0., 1., 0.])
    sample = WeightedSample(space, sample_vmf(mu, 200., RngStream(34), size=5000))
    reference = space.distances(mu, sample_vmf(mu, 200., RngStream(35), size=200000)) ** 2

    variance = frechet_variance(sample, frechet_mean(sample).minimizer)

    standard_error = math.sqrt(np.var(reference) / 5000 + np.var(reference) / reference.size)
    assert abs(variance - reference.mean()) < 3. * standard_error


data = []

data += [([[0.], [1.], [10.]], None, None, 1)]
data += [([[0.], [1.], [10.]], None, [0, 2], 0)]
data += [([[5.], [5.], [1.]], None, None, 0)]
data += [([[0.], [1.], [10.]], [1., 1., 100.], None, 2)]
data += [([[4.]], None, None, 0)]


@pytest.mark.parametrize("points, weights, candidates, index", data)
def test_medoid(points, weights, candidates, index):
    """
    Test medoids, candidate restriction and tie breaking by the lowest index

    :param list points: The sample
    :param list weights: The raw weights
    :param list candidates: The admissible indices
    :param int index: The expected medoid index
    """

    sample = WeightedSample(_space("euclidean:1"), np.array(points), weights)

    report = frechet_medoid(sample, candidates)

    assert report.index == index
    assert report.method is SolveMethod.MEDOID
    assert np.allclose(report.minimizer, points[index])


def test_medoid_brute_force():
    """
    Test the medoid against exhaustive search, with and without a precomputed distance matrix
    """

    space = _space("euclidean:2")
    stream = RngStream(36)
    points = stream.standard_normal((50, 2))
    weights = stream.random(50)
    sample = WeightedSample(space, points, weights)
    objectives = [frechet_functional(sample, y) for y in points]

    report = frechet_medoid(sample)
    cached = frechet_medoid(sample, distance_matrix=space.pairwise(points))

    assert report.index == int(np.argmin(objectives))
    assert cached.index == report.index
    assert np.isclose(report.objective, min(objectives))
    assert report.objective >= frechet_mean(sample).objective


def test_medoid_on_spheroid():
    """
    Test that spheroid-induced samples have medoids but no means
    """

    space = _space("spheroid:0.5:1")
    points = sample_vmf(np.array([0., 0., 1.]), 20., RngStream(37), size=15)
    sample = WeightedSample(space, points)

    with pytest.raises(UnsupportedSpaceError):
        frechet_mean(sample)
    assert 0 <= frechet_medoid(sample).index < 15


data = []

data += [(np.empty((0, 1)), None)]
data += [(np.array([[0.], [1.]]), [0., 0.])]
data += [(np.array([[0.], [1.]]), [1., -1.])]


@pytest.mark.parametrize("points, weights", data)
def test_invalid_samples(points, weights):
    """
    Test that empty samples and invalid weights are rejected

    :param np.ndarray points: The sample
    :param list weights: The raw weights
    """

    with pytest.raises(FitError):
        frechet_mean(WeightedSample(_space("euclidean:1"), points, weights))


def test_empty_candidates():
    """
    Test that an empty medoid candidate set is rejected
    """

    sample = WeightedSample(_space("euclidean:1"), np.array([[0.], [1.]]))

    with pytest.raises(FitError):
        frechet_medoid(sample, [])
