"""Self-checks of the geometry and of the closed-form means

Each check returns a :class:`CheckResult`; the suites return lists of them and never raise on a failed check.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import UnsupportedSpaceError, ValidationFailure
from .finite_difference import numeric_gradient
from .frechet import WeightedSample, frechet_mean
from .harness import LOSS_DRAWS, LOSS_GRID_SIZE, default_scale_matrix, validate_frechet_means
from .metric import SpaceDescriptor, SpaceKind, space_for
from .sampling import as_stream, hvmf_log_normalizer, hvmf_log_normalizer_quadrature, sample_hvmf, \
    sample_uniform_sphere, sample_wishart, wishart_ai_constant, wishart_lc_mean
from .scenarios import build_scenario
from . import spd

logger = logging.getLogger(__name__)

GEOMETRY_SPACES = ("euclidean:1", "euclidean:5", "sphere:3", "hyperboloid:3", "spd:2:ai", "spd:2:lc", "spd:2:le",
                   "quantile:100", "spheroid:0.5:1", "spheroid:1:1")
SYMMETRY_TOLERANCE = 1e-12
TRIANGLE_SLACK = 1e-9
# distances that go through an eigensolver or a geodesic solver are exact only to rounding of those solvers
SOLVER_TOLERANCES = {SpaceKind.SPD: 1e-9, SpaceKind.SPHEROID: 1e-9}


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check

    :param str name: What was checked
    :param float value: The measured discrepancy or statistic
    :param float tolerance: The acceptance threshold
    :param bool passed: Whether ``value`` is acceptable
    """

    name: str
    value: float
    tolerance: float
    passed: bool

    def __str__(self):
        return "{0:4s} {1}: value {2:.3e}, tolerance {3:.3e}".format("PASS" if self.passed else "FAIL", self.name,
                                                                   self.value, self.tolerance)


def _at_most(name, value, tolerance):
    value = float(value)
    return CheckResult(name, value, tolerance, bool(value <= tolerance))


def require(results):
    """Raise :class:`ValidationFailure` naming every failed check"""
    failed = [result.name for result in results if not result.passed]
    if failed:
        raise ValidationFailure(f"{len(failed)} of {len(results)} checks failed: {', '.join(failed)}")
    return results


def random_points(descriptor, n, rng):
    """``n`` random points of a space, spread over a few units of distance"""
    dim = descriptor.dim
    if descriptor.kind is SpaceKind.EUCLIDEAN:
        return rng.standard_normal((n, dim))
    if descriptor.kind is SpaceKind.QUANTILE:
        return np.sort(rng.standard_normal((n, dim)), axis=1)
    if descriptor.kind in (SpaceKind.SPHERE, SpaceKind.SPHEROID):
        return sample_uniform_sphere(dim, rng, size=n)
    if descriptor.kind is SpaceKind.HYPERBOLOID:
        v = rng.standard_normal((n, dim - 1))
        return np.column_stack([np.sqrt(1. + np.sum(v ** 2, axis=1)), v])
    if descriptor.kind is SpaceKind.SPD:
        return sample_wishart(dim + 2, np.eye(dim), rng, size=n) / (dim + 2.)
    raise UnsupportedSpaceError(f"no random points for {descriptor}")


def check_metric_axioms(descriptor, triples=10000, rng=0):
    """Symmetry, identity, nonnegativity and the triangle inequality on random triples

    Stacks of equal length are compared row by row.
    """
    descriptor = SpaceDescriptor.parse(descriptor) if isinstance(descriptor, str) else descriptor
    stream = as_stream(rng)
    space = space_for(descriptor)
    X, Y, Z = (random_points(descriptor, triples, stream) for _ in range(3))
    dxy, dyx = space.distances(X, Y), space.distances(Y, X)
    dyz, dxz = space.distances(Y, Z), space.distances(X, Z)
    dxx = space.distances(X, X)
    tolerance = SOLVER_TOLERANCES.get(descriptor.kind, SYMMETRY_TOLERANCE)
    scale = np.maximum(1., dxy)
    return [_at_most(f"{descriptor} symmetry", np.max(np.abs(dxy - dyx) / scale), tolerance),
            _at_most(f"{descriptor} identity", np.max(dxx), tolerance),
            _at_most(f"{descriptor} nonnegativity", -np.min(np.concatenate([dxy, dyz, dxz])), 0.),
            _at_most(f"{descriptor} triangle inequality", np.max((dxz - dxy - dyz) / np.maximum(1., dxz)),
                     TRIANGLE_SLACK)]


def check_lc_isometry(q=2, n=1000, rng=0):
    """The log-Cholesky map and its inverse are mutually inverse and carry LC distances to Euclidean ones"""
    stream = as_stream(rng)
    descriptor = SpaceDescriptor.parse(f"spd:{q}:lc")
    S = random_points(descriptor, n, stream)
    T = random_points(descriptor, n, stream)
    roundtrip = spd.log_cholesky_inverse(spd.log_cholesky(S), q)
    error = np.max(np.abs(roundtrip - S) / np.maximum(1., np.abs(S).max(axis=(-2, -1)))[:, None, None])
    space = space_for(descriptor)
    embedded = np.linalg.norm(spd.log_cholesky(S) - spd.log_cholesky(T), axis=-1)
    return [_at_most(f"log-Cholesky round trip (q={q})", error, 1e-12),
            _at_most(f"log-Cholesky isometry (q={q})", np.max(np.abs(space.distances(S, T) - embedded)), 1e-12)]


def check_ai_invariance(q=2, n=1000, rng=0):
    """``d_AI(A S A^T, A T A^T) = d_AI(S, T)`` for random invertible ``A``"""
    stream = as_stream(rng)
    descriptor = SpaceDescriptor.parse(f"spd:{q}:ai")
    S, T = random_points(descriptor, n, stream), random_points(descriptor, n, stream)
    A = stream.standard_normal((n, q, q)) + 2. * np.eye(q)

    def transform(M):
        return spd.symmetrize(A @ M @ np.swapaxes(A, -1, -2))

    space = space_for(descriptor)
    before = space.distances(S, T)
    after = space.distances(transform(S), transform(T))
    return [_at_most(f"affine invariance (q={q})", np.max(np.abs(after - before) / np.maximum(1., before)), 1e-8)]


def check_spheroid_sphere_agreement(n=1000, rng=0, tolerance=1e-6):
    """The metric induced by the unit sphere seen as a spheroid is the great-circle distance"""
    stream = as_stream(rng)
    X = sample_uniform_sphere(3, stream, size=n)
    Y = sample_uniform_sphere(3, stream, size=n)
    induced = space_for(SpaceDescriptor.parse("spheroid:1:1")).distances(X, Y)
    sphere = space_for(SpaceDescriptor.parse("sphere:3")).distances(X, Y)
    return [_at_most("spheroid a=c=1 against the sphere", np.max(np.abs(induced - sphere)), tolerance)]


def geometry_suite(triples=10000, rng=0, spaces=GEOMETRY_SPACES):
    """Metric axioms on every space plus the SPD and spheroid identities"""
    stream = as_stream(rng)
    results = []
    for k, text in enumerate(spaces):
        results += check_metric_axioms(text, triples, stream.spawn(0, k))
        logger.debug("checked the metric axioms of %s", text)
    results += check_lc_isometry(rng=stream.spawn(1))
    results += check_ai_invariance(rng=stream.spawn(2))
    results += check_spheroid_sphere_agreement(rng=stream.spawn(3))
    return results


def check_loss_curves(q=2, d=15, n_draws=LOSS_DRAWS, grid_size=LOSS_GRID_SIZE, rng=0, ai_mean_factor=1.):
    """The Monte Carlo Fréchet losses along the interpolation path are minimized at the closed-form means"""
    report = validate_frechet_means(q, d, n_draws=n_draws, grid_size=grid_size, rng=rng,
                                    ai_mean_factor=ai_mean_factor)
    extra = report.extra
    return [_at_most(f"affine-invariant loss argmin at t=0 (q={q}, d={d})", abs(extra["argmin_t_ai"]),
                     extra["tolerance_ai"]),
            _at_most(f"log-Cholesky loss argmin at t=1 (q={q}, d={d})", abs(extra["argmin_t_lc"] - 1.),
                     extra["tolerance_lc"])]


def _lc_functional(points):
    coordinates = spd.log_cholesky(points)
    return lambda v: float(np.mean(np.sum((coordinates - v) ** 2, axis=1)))


def _le_functional(points, q):
    logs = spd.logm(points)
    rows, cols = np.triu_indices(q)

    def functional(v):
        L = np.zeros((q, q))
        L[rows, cols] = v
        L = L + np.triu(L, 1).T
        return float(np.mean(np.sum((logs - L) ** 2, axis=(-2, -1))))

    return functional


def check_first_order_optimality(q=2, d=15, n=500, rng=0, h=1e-4, tolerance=1e-6):
    """Numerical gradients of the LC and LE Fréchet functionals vanish at their closed-form means"""
    stream = as_stream(rng)
    points = sample_wishart(d, default_scale_matrix(q), stream, size=n)
    results = []
    for metric in ("lc", "le"):
        space = space_for(SpaceDescriptor.parse(f"spd:{q}:{metric}"))
        mean = space.closed_form_mean(points, np.ones(n))
        if metric == "lc":
            functional, x0 = _lc_functional(points), spd.log_cholesky(mean)
        else:
            functional, x0 = _le_functional(points, q), spd.logm(mean)[np.triu_indices(q)]
        gradient = numeric_gradient(functional, x0, h, accuracy_order=4)
        results.append(_at_most(f"{metric.upper()} first-order optimality (q={q})", np.max(np.abs(gradient)),
                                tolerance))
    return results


def check_wishart_means(q=2, d=15, n=4000, rng=0, standard_errors=4.):
    """Sample Fréchet means of Wishart draws approach the closed forms ``c_{d,q} sigma`` (AI) and the LC mean

    The tolerance is ``standard_errors`` times ``sqrt(V / n)`` with ``V`` the sample Fréchet variance.
    """
    stream = as_stream(rng)
    sigma = default_scale_matrix(q)
    points = sample_wishart(d, sigma, stream, size=n)
    results = []
    for metric, expected in (("ai", wishart_ai_constant(d, q) * sigma), ("lc", wishart_lc_mean(d, sigma))):
        space = space_for(SpaceDescriptor.parse(f"spd:{q}:{metric}"))
        estimate = frechet_mean(WeightedSample(space, points)).minimizer
        variance = np.mean(space.distances(estimate, points) ** 2)
        results.append(_at_most(f"Wishart {metric.upper()} mean (q={q}, d={d})", space.distance(expected, estimate),
                                standard_errors * math.sqrt(variance / n)))
    return results


def check_hvmf_normalizer(dims=(2, 3), kappas=(1., 10., 50.), tolerance=1e-8):
    """The Bessel closed form of the HvMF normalizing constant against quadrature"""
    results = []
    for d in dims:
        for kappa in kappas:
            closed = hvmf_log_normalizer(d, kappa)
            quadrature = hvmf_log_normalizer_quadrature(d, kappa)
            results.append(_at_most(f"HvMF normalizer (d={d}, kappa={kappa:g})", abs(math.expm1(closed - quadrature)),
                                    tolerance))
    return results


def check_hvmf_mean(kappa=50., n=100000, rng=0, tolerance=0.02):
    """The sample Fréchet mean of HvMF draws sits near the location"""
    mu = np.array([math.cosh(0.5), math.sinh(0.5), 0.])
    space = space_for(SpaceDescriptor.parse("hyperboloid:3"))
    draws = sample_hvmf(mu, kappa, as_stream(rng), size=n)
    estimate = frechet_mean(WeightedSample(space, draws)).minimizer
    return [_at_most(f"HvMF sample mean (kappa={kappa:g})", space.distance(mu, estimate), tolerance)]


def means_suite(q=2, d=15, n_draws=LOSS_DRAWS, grid_size=LOSS_GRID_SIZE, rng=0, ai_mean_factor=1.):
    """Loss curves, first-order optimality, Wishart and HvMF checks"""
    stream = as_stream(rng)
    results = check_loss_curves(q, d, n_draws, grid_size, stream.spawn(0), ai_mean_factor)
    results += check_first_order_optimality(q, d, rng=stream.spawn(1))
    results += check_wishart_means(q, d, rng=stream.spawn(2))
    results += check_hvmf_normalizer()
    results += check_hvmf_mean(rng=stream.spawn(3))
    return results


def radial_errors(scenario, dataset):
    """``d(Y_i, m(X_i))`` under a scenario's regression function"""
    means = scenario.regression(dataset.predictors)
    space = dataset.response_space
    return np.array([space.distance(m, y) for m, y in zip(means, dataset.responses)])


def check_error_independence(spec, n=2000, rng=0, significance=0.01, scenario=None):
    """Two-sample Kolmogorov-Smirnov comparison of radial errors below and above the median predictor

    The strata split at the median of the first predictor coordinate. The check passes when the test does not reject
    equality of the error laws at ``significance``.

    :param ScenarioSpec spec: The scenario
    :param Scenario scenario: An already built scenario overriding ``spec``
    """
    scenario = scenario or build_scenario(spec)
    dataset = scenario.generate(n, as_stream(rng))
    errors = radial_errors(scenario, dataset)
    coordinate = np.asarray(dataset.predictors[0]).reshape(n, -1)[:, 0]
    low = coordinate <= np.median(coordinate)
    result = stats.ks_2samp(errors[low], errors[~low])
    name = f"error independence ({scenario.spec.describe()})"
    return CheckResult(name, float(result.pvalue), significance, bool(result.pvalue > significance))
