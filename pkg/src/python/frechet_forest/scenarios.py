"""Data-generating processes with known conditional Fréchet means

Each scenario draws predictors, evaluates the regression function ``m(x)`` and samples responses ``Y | X = x``
whose error ``d(Y, m(X))`` is independent of ``X``. Predictors are handled as tuples of stacked blocks, one per
component of the predictor product space.
"""

import abc
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dataset import Dataset
from .errors import ConfigurationError
from .metric import SPDMetric, SpaceDescriptor, SpaceKind, space_for
from .sampling import sample_hvmf, sample_vmf, sample_wishart, wishart_ai_constant, wishart_lc_scale

logger = logging.getLogger(__name__)

MU = np.array([1., 1.]) / math.sqrt(2.)
SIGMA_1 = np.array([[1., -0.6], [-0.6, 0.5]])
SIGMA_2 = np.eye(2)
SIGMA_3 = np.array([[0.5, 0.4], [0.4, 1.]])
AR1_CORRELATION = 0.75


class ScenarioName(enum.Enum):
    EUCLIDEAN_LINEAR = "euclidean_linear"
    EUCLIDEAN_MULTIVARIATE = "euclidean_multivariate"
    SPHERE_GREAT_CIRCLE = "sphere_great_circle"
    HYPERBOLOID_MERIDIAN = "hyperboloid_meridian"
    SPD_WISHART_INTERP = "spd_wishart_interp"
    QUANTILE_GRID = "quantile_grid"
    SPHERE_ANISOTROPIC = "sphere_anisotropic"


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of a data-generating process

    :param ScenarioName name: The model
    :param int n: The sample size
    :param float sigma: Noise standard deviation of the Euclidean linear model
    :param int q: Response dimension of the multivariate Euclidean model
    :param float kappa: Concentration of the sphere and hyperboloid models
    :param float d: Wishart degrees of freedom of the SPD model
    :param str metric: SPD response metric (``ai``, ``lc`` or ``le``)
    :param str theta_law: Law of the sphere model's angle, ``vmf`` or ``uniform``
    :param int grid_size: Number of quantile levels of the quantile-grid model
    :param float gamma0: Mean location of the quantile-grid model
    :param float sigma0: Mean scale of the quantile-grid model
    :param float sigma_lon: Longitudinal displacement SD of the anisotropic sphere model (radians)
    :param float sigma_lat: Latitudinal displacement SD of the anisotropic sphere model (radians)
    :param float drift: Latitude-dependent longitudinal drift of the anisotropic sphere model (radians)
    :param float spheroid_a: Equatorial semi-axis of the anisotropic model's response metric; None for the sphere
    :param float spheroid_c: Polar semi-axis of the anisotropic model's response metric
    """

    name: ScenarioName
    n: int = 200
    sigma: float = math.sqrt(3.) / 2.
    q: int = 1
    kappa: float = 50.
    d: float = 15.
    metric: str = "ai"
    theta_law: str = "vmf"
    grid_size: int = 100
    gamma0: float = 0.
    sigma0: float = 1.
    sigma_lon: float = 0.15
    sigma_lat: float = 0.05
    drift: float = 0.05
    spheroid_a: float = None
    spheroid_c: float = 1.

    def __post_init__(self):
        if not isinstance(self.name, ScenarioName):
            try:
                object.__setattr__(self, "name", ScenarioName(str(self.name).lower()))
            except ValueError:
                raise ConfigurationError(f"unknown scenario '{self.name}'")
        checks = [(self.n >= 2, f"n must be at least 2, got {self.n}"),
                  (self.sigma >= 0, f"sigma must be nonnegative, got {self.sigma}"),
                  (self.q >= 1, f"q must be at least 1, got {self.q}"),
                  (self.kappa > 0, f"kappa must be positive, got {self.kappa}"),
                  (self.d >= 2, f"Wishart degrees of freedom must be at least 2, got {self.d}"),
                  (self.metric in ("ai", "lc", "le"), f"unknown SPD metric '{self.metric}'"),
                  (self.theta_law in ("vmf", "uniform"), f"unknown angle law '{self.theta_law}'"),
                  (self.grid_size >= 1, f"grid_size must be at least 1, got {self.grid_size}"),
                  (self.sigma0 > 0, f"sigma0 must be positive, got {self.sigma0}"),
                  (self.sigma_lon > 0 and self.sigma_lat > 0, "displacement SDs must be positive"),
                  (self.spheroid_a is None or (self.spheroid_a > 0 and self.spheroid_c > 0),
                   "spheroid semi-axes must be positive")]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)

    def describe(self):
        parameters = {ScenarioName.EUCLIDEAN_LINEAR: ("sigma",), ScenarioName.EUCLIDEAN_MULTIVARIATE: ("q",),
                      ScenarioName.SPHERE_GREAT_CIRCLE: ("kappa", "theta_law"),
                      ScenarioName.HYPERBOLOID_MERIDIAN: ("kappa",), ScenarioName.SPD_WISHART_INTERP: ("d", "metric"),
                      ScenarioName.QUANTILE_GRID: ("grid_size", "gamma0", "sigma0"),
                      ScenarioName.SPHERE_ANISOTROPIC: ("sigma_lon", "sigma_lat", "drift", "spheroid_a")}
        values = ";".join(f"{key}={getattr(self, key)}" for key in parameters[self.name])
        return f"{self.name.value}({values})"


def beta_predictor(rng, size):
    """``X = 2 sqrt(5) (W - 1/2)`` with ``W ~ Beta(2, 2)``: zero mean, unit variance"""
    return 2. * math.sqrt(5.) * (rng.beta(2., 2., size=size) - 0.5)


def beta_predictor_quantile(level):
    return 2. * math.sqrt(5.) * (stats.beta.ppf(level, 2., 2.) - 0.5)


def great_circle(theta, mu=MU):
    """``m(theta) = (cos theta, sin theta mu)`` on the sphere"""
    theta = np.asarray(theta, dtype=float)
    return np.concatenate([np.cos(theta)[..., None], np.sin(theta)[..., None] * mu], axis=-1)


def hyperbolic_meridian(theta, mu=MU):
    """``m(theta) = (cosh theta, sinh theta mu)`` on the hyperboloid"""
    theta = np.asarray(theta, dtype=float)
    return np.concatenate([np.cosh(theta)[..., None], np.sinh(theta)[..., None] * mu], axis=-1)


def spd_interpolation(x):
    """Piecewise interpolation through ``SIGMA_1``, ``SIGMA_2`` and ``SIGMA_3`` (parity of ``floor(x + 1/2)``)"""
    x = np.asarray(x, dtype=float)
    c2 = np.cos(np.pi * x)[..., None, None] ** 2
    s2 = np.sin(np.pi * x)[..., None, None] ** 2
    even = (np.floor(x + 0.5).astype(int) % 2 == 0)[..., None, None]
    return np.where(even, c2 * SIGMA_1 + s2 * SIGMA_2, s2 * SIGMA_2 + c2 * SIGMA_3)


def ar1_covariance(q, rho=AR1_CORRELATION):
    idx = np.arange(q)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def linear_coefficients(p, q):
    """``beta_jk = sqrt(j) sin(k pi / (q + 1))``"""
    j = np.arange(1, p + 1)[:, None]
    k = np.arange(1, q + 1)[None, :]
    return np.sqrt(j) * np.sin(k * np.pi / (q + 1))


def _euclidean(dim):
    return SpaceDescriptor(SpaceKind.EUCLIDEAN, dim=dim)


class Scenario(abc.ABC):
    """A regression model ``Y | X = x`` with known conditional Fréchet mean ``m(x)``"""

    predictor_descriptor = None
    response_descriptor = None
    has_population_law = True

    def __init__(self, spec):
        self.spec = spec

    def __repr__(self):
        return "{0}({1})".format(type(self).__name__, self.spec.describe())

    @abc.abstractmethod
    def sample_predictors(self, n, rng):
        """Draw ``n`` predictors as a tuple of blocks"""

    @abc.abstractmethod
    def regression(self, predictors):
        """The conditional Fréchet means ``m(x)`` of a tuple of predictor blocks"""

    @abc.abstractmethod
    def sample_response(self, predictors, rng):
        """One response per predictor row"""

    @abc.abstractmethod
    def x_quantile(self, level):
        """The predictor whose coordinates sit at the ``level`` quantile of their law, as single-row blocks"""

    def default_x0(self):
        """The fixed predictor of conditional coverage experiments"""
        return self.x_quantile(0.25)

    def population_radius(self, alpha):
        """Closed-form ``(1 - alpha)`` quantile of ``d(Y, m(X))``, or None when it must be simulated"""
        return None

    def sample_response_at(self, x, size, rng):
        """``size`` draws of ``Y | X = x`` for a single-row predictor ``x``"""
        tiled = tuple(np.repeat(np.asarray(block)[:1], size, axis=0) for block in x)
        return self.sample_response(tiled, rng)

    def sample_errors(self, x, size, rng):
        """Draws of the radial error ``d(Y, m(x))`` at a single-row predictor ``x``"""
        center = self.regression(x)[0]
        return space_for(self.response_descriptor).distances(center, self.sample_response_at(x, size, rng))

    def generate(self, n, rng):
        predictors = self.sample_predictors(n, rng)
        responses = self.sample_response(predictors, rng)
        return Dataset(self.predictor_descriptor, self.response_descriptor, predictors, responses)


class EuclideanLinear(Scenario):
    """``Y = X1 - X2 + X3 + eps`` with ``eps ~ N(0, sigma^2)``"""

    predictor_descriptor = SpaceDescriptor(SpaceKind.PRODUCT, components=(_euclidean(1),) * 3)
    response_descriptor = _euclidean(1)

    def sample_predictors(self, n, rng):
        X = beta_predictor(rng, (n, 3))
        return tuple(X[:, j:j + 1] for j in range(3))

    def regression(self, predictors):
        x1, x2, x3 = predictors
        return x1 - x2 + x3

    def sample_response(self, predictors, rng):
        m = self.regression(predictors)
        return m + self.spec.sigma * rng.standard_normal(m.shape)

    def x_quantile(self, level):
        value = beta_predictor_quantile(level)
        return tuple(np.array([[value]]) for _ in range(3))

    def population_radius(self, alpha):
        return float(self.spec.sigma * stats.chi.ppf(1. - alpha, 1))


class EuclideanMultivariate(EuclideanLinear):
    """``Y = X B + eps`` with AR(1) correlated Gaussian noise in ``R^q``"""

    def __init__(self, spec):
        super().__init__(spec)
        self.response_descriptor = _euclidean(spec.q)
        self.coefficients = linear_coefficients(3, spec.q)
        self.noise_factor = np.linalg.cholesky(ar1_covariance(spec.q))

    def regression(self, predictors):
        return np.hstack(predictors) @ self.coefficients

    def sample_response(self, predictors, rng):
        m = self.regression(predictors)
        return m + rng.standard_normal(m.shape) @ self.noise_factor.T

    def population_radius(self, alpha):
        return None


class SphereGreatCircle(Scenario):
    """``Y | X ~ vMF(m(Theta), kappa)`` around a great circle, with ``Theta = atan2(X2, X1)``"""

    predictor_descriptor = SpaceDescriptor(SpaceKind.PRODUCT, components=(SpaceDescriptor(SpaceKind.SPHERE, dim=2),))
    response_descriptor = SpaceDescriptor(SpaceKind.SPHERE, dim=3)

    def sample_predictors(self, n, rng):
        if self.spec.theta_law == "uniform":
            theta = rng.random(n)
            return (np.column_stack([np.cos(theta), np.sin(theta)]),)
        return (sample_vmf(np.array([1., 0.]), 1., rng, size=n),)

    def regression(self, predictors):
        X = predictors[0]
        return great_circle(np.arctan2(X[:, 1], X[:, 0]))

    def sample_response(self, predictors, rng):
        m = self.regression(predictors)
        return np.vstack([sample_vmf(mu, self.spec.kappa, rng) for mu in m])

    def sample_response_at(self, x, size, rng):
        return sample_vmf(self.regression(x)[0], self.spec.kappa, rng, size=size)

    def x_quantile(self, level):
        if self.spec.theta_law == "uniform":
            theta = level
        else:
            theta = stats.vonmises.ppf(level, 1.)
        return (np.array([[math.cos(theta), math.sin(theta)]]),)

    def population_radius(self, alpha):
        kappa = self.spec.kappa
        cosine = 1. + math.log1p(-(1. - alpha) * -math.expm1(-2. * kappa)) / kappa
        return float(math.acos(min(1., max(-1., cosine))))


class HyperboloidMeridian(Scenario):
    """``Y | Theta ~ HvMF(m(Theta), kappa)`` along a meridian, with ``Theta ~ N(0, 1/4)``"""

    predictor_descriptor = SpaceDescriptor(SpaceKind.PRODUCT, components=(_euclidean(1),))
    response_descriptor = SpaceDescriptor(SpaceKind.HYPERBOLOID, dim=3)

    def sample_predictors(self, n, rng):
        return (0.5 * rng.standard_normal((n, 1)),)

    def regression(self, predictors):
        return hyperbolic_meridian(predictors[0][:, 0])

    def sample_response(self, predictors, rng):
        m = self.regression(predictors)
        return np.vstack([sample_hvmf(mu, self.spec.kappa, rng) for mu in m])

    def sample_response_at(self, x, size, rng):
        return sample_hvmf(self.regression(x)[0], self.spec.kappa, rng, size=size)

    def x_quantile(self, level):
        return (np.array([[0.5 * stats.norm.ppf(level)]]),)

    def default_x0(self):
        return (np.array([[0.25 * stats.norm.ppf(0.25)]]),)

    def population_radius(self, alpha):
        return float(math.acosh(1. - math.log(alpha) / self.spec.kappa))


class SPDWishartInterp(Scenario):
    """``S | X ~ Wishart_2(d, Sigma(X))`` with conditional Fréchet mean ``M0(X)`` under the chosen metric

    For the affine-invariant and log-Euclidean metrics ``Sigma(x) = M0(x) / c_{d,2}``; for the log-Cholesky metric
    the scale is chosen so that the log-Cholesky mean of the Wishart law is ``M0(x)``.
    """

    predictor_descriptor = SpaceDescriptor(SpaceKind.PRODUCT, components=(_euclidean(1),))

    def __init__(self, spec):
        super().__init__(spec)
        self.response_descriptor = SpaceDescriptor(SpaceKind.SPD, dim=2, metric=SPDMetric(spec.metric))
        self.ai_constant = wishart_ai_constant(spec.d, 2)

    def sample_predictors(self, n, rng):
        return (beta_predictor(rng, (n, 1)),)

    def regression(self, predictors):
        return spd_interpolation(predictors[0][:, 0])

    def scale(self, mean):
        if self.spec.metric == "lc":
            return wishart_lc_scale(self.spec.d, mean)
        return mean / self.ai_constant

    def sample_response(self, predictors, rng):
        return np.stack([sample_wishart(self.spec.d, self.scale(m), rng) for m in self.regression(predictors)])

    def sample_response_at(self, x, size, rng):
        return sample_wishart(self.spec.d, self.scale(self.regression(x)[0]), rng, size=size)

    def x_quantile(self, level):
        return (np.array([[beta_predictor_quantile(level)]]),)


class QuantileGridModel(Scenario):
    """Random location-scale quantile functions ``gamma + f(X) + (sigma + g(X)) Phi^-1(u)``

    ``X ~ U(0, 1)``, ``f(x) = 2x`` and ``g(x) = x/2``; ``gamma ~ N(gamma0, 0.1^2)`` and ``sigma`` is gamma
    distributed with mean ``sigma0`` and variance 0.01, so every response is a nondecreasing grid.
    """

    predictor_descriptor = SpaceDescriptor(SpaceKind.PRODUCT, components=(_euclidean(1),))

    def __init__(self, spec):
        super().__init__(spec)
        self.response_descriptor = SpaceDescriptor(SpaceKind.QUANTILE, dim=spec.grid_size)
        m = spec.grid_size
        self.levels = (np.arange(1, m + 1) - 0.5) / m
        self.base_quantiles = stats.norm.ppf(self.levels)

    def sample_predictors(self, n, rng):
        return (rng.random((n, 1)),)

    def _grid(self, x, gamma, sigma):
        return (gamma + 2. * x)[:, None] + (sigma + 0.5 * x)[:, None] * self.base_quantiles

    def regression(self, predictors):
        x = predictors[0][:, 0]
        return self._grid(x, self.spec.gamma0, self.spec.sigma0)

    def sample_response(self, predictors, rng):
        x = predictors[0][:, 0]
        gamma = self.spec.gamma0 + 0.1 * rng.standard_normal(x.size)
        shape = self.spec.sigma0 ** 2 / 0.01
        sigma = rng.gamma(shape, self.spec.sigma0 / shape, size=x.size)
        return self._grid(x, gamma, sigma)

    def x_quantile(self, level):
        return (np.array([[float(level)]]),)


class SphereAnisotropic(Scenario):
    """Displacements on the sphere dominated by longitude

    A birth location has latitude uniform in +-40 degrees and uniform longitude. The response moves it by a
    longitudinal displacement ``N(drift sin(lat), sigma_lon^2)`` and a latitudinal displacement
    ``N(0, sigma_lat^2)``. The response metric is the sphere's or the one induced by a spheroid.
    """

    predictor_descriptor = SpaceDescriptor(SpaceKind.PRODUCT, components=(SpaceDescriptor(SpaceKind.SPHERE, dim=3),))
    has_population_law = False
    max_latitude = math.radians(40.)

    def __init__(self, spec):
        super().__init__(spec)
        if spec.spheroid_a is None:
            self.response_descriptor = SpaceDescriptor(SpaceKind.SPHERE, dim=3)
        else:
            self.response_descriptor = SpaceDescriptor(SpaceKind.SPHEROID, a=spec.spheroid_a, c=spec.spheroid_c)

    @staticmethod
    def to_cartesian(latitude, longitude):
        return np.column_stack([np.cos(latitude) * np.cos(longitude), np.cos(latitude) * np.sin(longitude),
                                np.sin(latitude)])

    @staticmethod
    def to_angles(X):
        return np.arctan2(X[:, 2], np.hypot(X[:, 0], X[:, 1])), np.arctan2(X[:, 1], X[:, 0])

    def sample_predictors(self, n, rng):
        latitude = rng.uniform(-self.max_latitude, self.max_latitude, size=n)
        longitude = rng.uniform(-np.pi, np.pi, size=n)
        return (self.to_cartesian(latitude, longitude),)

    def regression(self, predictors):
        """The location reached by the mean displacement"""
        latitude, longitude = self.to_angles(predictors[0])
        return self.to_cartesian(latitude, longitude + self.spec.drift * np.sin(latitude))

    def sample_response(self, predictors, rng):
        latitude, longitude = self.to_angles(predictors[0])
        n = latitude.size
        shift = self.spec.drift * np.sin(latitude) + self.spec.sigma_lon * rng.standard_normal(n)
        return self.to_cartesian(latitude + self.spec.sigma_lat * rng.standard_normal(n), longitude + shift)

    def x_quantile(self, level):
        latitude = -self.max_latitude + 2. * self.max_latitude * level
        return (self.to_cartesian(np.array([latitude]), np.array([0.])),)


SCENARIOS = {ScenarioName.EUCLIDEAN_LINEAR: EuclideanLinear, ScenarioName.EUCLIDEAN_MULTIVARIATE: EuclideanMultivariate,
             ScenarioName.SPHERE_GREAT_CIRCLE: SphereGreatCircle,
             ScenarioName.HYPERBOLOID_MERIDIAN: HyperboloidMeridian,
             ScenarioName.SPD_WISHART_INTERP: SPDWishartInterp, ScenarioName.QUANTILE_GRID: QuantileGridModel,
             ScenarioName.SPHERE_ANISOTROPIC: SphereAnisotropic}


def build_scenario(spec):
    """The :class:`Scenario` implementing ``spec``"""
    return SCENARIOS[spec.name](spec)


def generate_scenario(spec, rng, n=None):
    """Draw a dataset of ``spec.n`` (or ``n``) observations

    :param ScenarioSpec spec: The scenario
    :param rng: An :class:`RngStream` or numpy generator
    :param int n: Optional sample size overriding ``spec.n``

    :returns: The :class:`Dataset` and the regression function ``m`` acting on predictor blocks
    """
    scenario = build_scenario(spec)
    return scenario.generate(spec.n if n is None else n, rng), scenario.regression
