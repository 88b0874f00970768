"""Monte Carlo coverage experiments

Every experiment cell is identified by a coverage type and a sample size. Replicate ``a`` of a cell draws all of its
randomness from the stream ``RngStream(seed).spawn(cell, n, 0, a)``, so results do not depend on the number of
workers or on the order in which replicates finish.

Coverage types:

* ``I``: marginal; one training sample and one independent test pair per replicate.
* ``II``: conditional on the training sample; many test pairs per replicate.
* ``III``: conditional on the predictor ``x0``; one training sample and one draw of ``Y | X = x0`` per replicate.
* ``IV``: conditional on both; many draws of ``Y | X = x0`` per replicate.
"""

import enum
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import joblib
import numpy as np
import pandas
from scipy import stats

from .balls import BallMethod, compute_oob_errors, empirical_quantile, fit_split_conformal, spheroid_ball_area
from .dataset import Dataset, metadata_line, write_csv
from .errors import ConfigurationError, FitError, FrechetForestError
from .forest import Flavor, ForestHyperparameters, fit_forest, predict, tune_hyperparameters
from .metric import SpaceDescriptor, SpaceKind, SPDMetric, space_for
from .sampling import RngStream, as_stream, sample_wishart, wishart_ai_constant, wishart_lc_mean
from .scenarios import SIGMA_1, ScenarioName, ScenarioSpec, ar1_covariance, build_scenario

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["scenario", "n", "alpha", "method", "coverage", "sd", "radius_mean", "radius_sd", "mse_mean",
                  "mse_sd", "seconds"]
WILSON_CONFIDENCE = 0.95
LOSS_GRID_SIZE = 600
LOSS_DRAWS = 25000
ARGMIN_STANDARD_ERRORS = 5.


class CoverageType(enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"

    @property
    def fixed_predictor(self):
        return self in (CoverageType.III, CoverageType.IV)

    @property
    def conditional_on_sample(self):
        return self in (CoverageType.II, CoverageType.IV)


# stream keys of the experiment kinds
_CELL_KEYS = {CoverageType.I: 1, CoverageType.II: 2, CoverageType.III: 3, CoverageType.IV: 4}
_MSE_KEY, _RADIUS_KEY, _SPHEROID_KEY = 5, 6, 7


@dataclass(frozen=True)
class ExperimentConfig:
    """Controls of a Monte Carlo experiment

    :param ScenarioSpec scenario: The data-generating process
    :param Flavor flavor: The forest flavor
    :param tuple alphas: Significance levels
    :param tuple n_values: Training sample sizes
    :param int replicates: Number of training samples ``N`` of Types II and IV
    :param int mc_size: Number ``M`` of replicates of Types I and III, and of test pairs of Types II and IV
    :param int bootstrap: Number ``K`` of bootstrap re-pairings for standard deviations
    :param int n_trees: Trees per forest
    :param int mtry: Features tried per node; all when None
    :param int min_split_size: Minimum child size
    :param bool tune: Cross-validate ``(min_split_size, mtry)`` once per replicate sample
    :param tuple x0: Flat coordinates of the fixed predictor; the scenario default when None
    :param tuple methods: Ball methods among :class:`BallMethod` ``OOB`` and ``SPLIT_CONFORMAL``
    :param int test_size: Fresh test draws per replicate in MSE comparisons
    :param tuple q_values: Response dimensions of the radius/volume comparison
    :param tuple spheroid_grid: Equatorial semi-axes of the spheroid study
    :param int area_draws: Monte Carlo draws per spheroid ball area
    :param float test_fraction: Held-out fraction of the spheroid study
    :param int seed: Root seed
    :param int n_jobs: joblib workers
    :param bool record_timings: Fill the ``seconds`` column; blank by default so reports depend on the seed only
    """

    scenario: ScenarioSpec
    flavor: Flavor = Flavor.RFWLCFR
    alphas: tuple = (0.01, 0.05, 0.10)
    n_values: tuple = (200,)
    replicates: int = 200
    mc_size: int = 500
    bootstrap: int = 200
    n_trees: int = 200
    mtry: int = None
    min_split_size: int = 5
    tune: bool = False
    x0: tuple = None
    methods: tuple = (BallMethod.OOB,)
    test_size: int = 1000
    q_values: tuple = (1, 5, 10)
    spheroid_grid: tuple = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)
    area_draws: int = 20000
    test_fraction: float = 0.25
    seed: int = 0
    n_jobs: int = 1
    record_timings: bool = False

    def __post_init__(self):
        object.__setattr__(self, "flavor", Flavor(self.flavor))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "methods", tuple(BallMethod(m) for m in self.methods))
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        for name in ("replicates", "mc_size", "bootstrap", "n_trees", "test_size", "area_draws"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be at least 1, got {getattr(self, name)}")
        if not self.alphas or not all(0 < a < 1 for a in self.alphas):
            raise ConfigurationError(f"alphas must lie in (0, 1), got {self.alphas}")
        if not self.n_values or min(self.n_values) < 2:
            raise ConfigurationError(f"n_values must hold sample sizes of at least 2, got {self.n_values}")
        allowed = {BallMethod.OOB, BallMethod.SPLIT_CONFORMAL}
        if not self.methods or not set(self.methods) <= allowed:
            raise ConfigurationError("methods must be a nonempty subset of oob and split_conformal")
        if BallMethod.SPLIT_CONFORMAL in self.methods and min(self.n_values) < 4:
            raise ConfigurationError("n_values must be at least 4 for split-conformal balls")
        if not 0 < self.test_fraction < 1:
            raise ConfigurationError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")

    def full_scale(self):
        """Copy with the full-scale Monte Carlo sizes, M = N = 1000 and K = 500"""
        return replace(self, mc_size=1000, replicates=1000, bootstrap=500)

    def hyperparameters(self):
        return ForestHyperparameters(self.n_trees, self.mtry, self.min_split_size)

    def as_dict(self):
        out = asdict(self)
        out["scenario"] = {key: (value.value if isinstance(value, enum.Enum) else value)
                           for key, value in asdict(self.scenario).items()}
        out["flavor"] = self.flavor.value
        out["methods"] = [m.value for m in self.methods]
        return out

    def config_hash(self):
        """Short digest of every setting that can change results"""
        settings = self.as_dict()
        for key in ("n_jobs", "record_timings"):
            settings.pop(key)
        return hashlib.sha256(json.dumps(settings, sort_keys=True).encode()).hexdigest()[:12]

    def x0_blocks(self, scenario):
        """The fixed predictor as single-row blocks"""
        if self.x0 is None:
            return tuple(np.asarray(block, dtype=float) for block in scenario.default_x0())
        descriptor = scenario.predictor_descriptor.as_product()
        if len(self.x0) != descriptor.size:
            raise ConfigurationError(f"x0 has {len(self.x0)} coordinates but {descriptor} needs {descriptor.size}")
        space = space_for(descriptor)
        blocks = tuple(space.unflatten(np.asarray([self.x0])))
        space.validate(blocks)
        return blocks


@dataclass(eq=False)
class CoverageReport:
    """Summary rows (one per cell) and raw per-replicate rows of an experiment

    :param str kind: The experiment kind, e.g. ``type_I``
    :param pandas.DataFrame summary: Cell rows; the columns of :data:`REPORT_COLUMNS` come first
    :param pandas.DataFrame raw: Per-replicate rows
    """

    kind: str
    summary: pandas.DataFrame
    raw: pandas.DataFrame = field(default_factory=pandas.DataFrame)
    extra: dict = field(default_factory=dict)

    def write(self, prefix, config=None):
        """Write ``{prefix}_{kind}.csv`` and ``{prefix}_{kind}_raw.csv``

        :returns: The written paths
        """
        from . import __version__
        metadata = metadata_line(__version__, None if config is None else config.seed,
                                 None if config is None else config.config_hash(), report=self.kind)
        paths = [f"{prefix}_{self.kind}.csv", f"{prefix}_{self.kind}_raw.csv"]
        write_csv(self.summary, paths[0], metadata)
        write_csv(self.raw, paths[1], metadata)
        return paths


def wilson_interval(p_hat, trials, confidence=WILSON_CONFIDENCE):
    """Wilson score interval of a binomial proportion"""
    if trials < 1:
        raise ConfigurationError("the Wilson interval needs at least one trial")
    z = stats.norm.ppf(0.5 + confidence / 2.)
    denominator = 1. + z ** 2 / trials
    center = (p_hat + z ** 2 / (2. * trials)) / denominator
    half = z / denominator * math.sqrt(max(p_hat * (1. - p_hat), 0.) / trials + z ** 2 / (4. * trials ** 2))
    return max(0., center - half), min(1., center + half)


def bootstrap_sd(indicators, K, rng):
    """Standard deviation of a coverage estimate by re-pairing replicates without refitting

    ``indicators[a, b]`` records whether the ball of training replicate ``a`` covers test pair ``b``. Each of the
    ``K`` resamples draws ``M`` training replicates and ``M`` test pairs independently with replacement and averages
    the indicators of the resulting pairs. A one-dimensional array is resampled as independent indicators.

    :param np.ndarray indicators: Shape ``(M, M)`` or ``(M,)``
    :param int K: Number of resamples, at least 2
    :param rng: Source of the resampling indices
    """
    if K < 2:
        raise ConfigurationError(f"the bootstrap needs at least 2 resamples, got {K}")
    indicators = np.asarray(indicators, dtype=float)
    M = indicators.shape[0]
    estimates = np.empty(K)
    for k in range(K):
        a = rng.integers(0, M, M)
        if indicators.ndim == 1:
            estimates[k] = indicators[a].mean()
        else:
            estimates[k] = indicators[a, rng.integers(0, M, M)].mean()
    return float(np.std(estimates, ddof=1))


def _hyperparameters(config, dataset, stream):
    if config.tune:
        return tune_hyperparameters(dataset, config.flavor, rng=stream, base=config.hyperparameters())
    return config.hyperparameters()


def _split_conformal(config, dataset, stream):
    return fit_split_conformal(dataset, config.flavor, config.hyperparameters(), stream, tune=config.tune)


def _draw_tests(scenario, size, rng, x0=None):
    """Test predictors and responses; with ``x0`` the predictor is fixed and returned as single-row blocks"""
    if x0 is not None:
        return x0, scenario.sample_response_at(x0, size, rng)
    X = scenario.sample_predictors(size, rng)
    return X, scenario.sample_response(X, rng)


def _test_distances(model, space, tests):
    """Distances from the forest predictions to the test responses"""
    X, Y = tests
    predictions = predict(model, X)
    if len(predictions) == 1:
        return space.distances(predictions[0], Y)
    return np.array([space.distance(p, y) for p, y in zip(predictions, Y)])


def _method_result(config, method, dataset, tests, stream):
    """Radii per alpha and test distances of one ball method on one replicate sample"""
    start = time.perf_counter()
    if method is BallMethod.OOB:
        model = fit_forest(dataset, config.flavor, _hyperparameters(config, dataset, stream.spawn(0)),
                           stream.spawn(1))
        errors = compute_oob_errors(model)
        radii = np.array([empirical_quantile(errors, alpha) for alpha in config.alphas])
    else:
        fitted = _split_conformal(config, dataset, stream.spawn(1))
        model = fitted.model
        radii = np.array([fitted.radius(alpha) for alpha in config.alphas])
    distances = _test_distances(model, dataset.response_space, tests)
    return {"radii": radii, "distances": distances, "mse": float(np.mean(distances ** 2)),
            "seconds": time.perf_counter() - start}


def _coverage_replicate(config, scenario, coverage_type, n, shared_tests, x0, a):
    stream = RngStream(config.seed).spawn(_CELL_KEYS[coverage_type], n, 0, a)
    dataset = scenario.generate(n, stream.spawn(0))
    tests = shared_tests if shared_tests is not None else _draw_tests(scenario, config.mc_size, stream.spawn(1), x0)
    return {method: _method_result(config, method, dataset, tests, stream.spawn(2, k))
            for k, method in enumerate(config.methods)}


def _run_replicates(config, task, count, *args):
    """``task(*args, a)`` for every replicate ``a``, in replicate order"""
    return joblib.Parallel(n_jobs=config.n_jobs)(joblib.delayed(task)(*args, a) for a in range(count))


def _seconds(config, method, values):
    seconds = float(np.mean(values))
    logger.info("%s: %.3f s per replicate", method.value, seconds)
    return seconds if config.record_timings else np.nan


def _sd(values):
    values = np.asarray(values, dtype=float)
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.


def _coverage_cell(config, scenario, coverage_type, n):
    x0 = config.x0_blocks(scenario) if coverage_type.fixed_predictor else None
    cell_stream = RngStream(config.seed).spawn(_CELL_KEYS[coverage_type], n)
    count = config.replicates if coverage_type.conditional_on_sample else config.mc_size
    shared_tests = None
    if not coverage_type.conditional_on_sample:
        shared_tests = _draw_tests(scenario, config.mc_size, cell_stream.spawn(1), x0)
    logger.info("coverage type %s, %s, n=%d: %d replicates", coverage_type.value, config.scenario.name.value, n,
                count)
    try:
        results = _run_replicates(config, _coverage_replicate, count, config, scenario, coverage_type, n,
                                  shared_tests, x0)
    except FrechetForestError as err:
        raise FitError(f"coverage type {coverage_type.value} cell with n={n} failed: {err}") from err

    rows, raw = [], []
    for m, method in enumerate(config.methods):
        radii = np.array([result[method]["radii"] for result in results])
        distances = np.array([result[method]["distances"] for result in results])
        mse = np.array([result[method]["mse"] for result in results])
        seconds = _seconds(config, method, [result[method]["seconds"] for result in results])
        for k, alpha in enumerate(config.alphas):
            covered = distances < radii[:, k][:, None]
            if coverage_type.conditional_on_sample:
                per_replicate = covered.mean(axis=1)
                coverage, sd, trials = float(per_replicate.mean()), _sd(per_replicate), covered.size
            else:
                per_replicate = np.diag(covered).astype(float)
                coverage, trials = float(per_replicate.mean()), count
                sd = (bootstrap_sd(covered, config.bootstrap, cell_stream.spawn(2, m, k))
                      if config.bootstrap >= 2 else np.nan)
            low, high = wilson_interval(coverage, trials)
            rows.append({"scenario": config.scenario.name.value, "n": n, "alpha": alpha, "method": method.value,
                         "coverage": coverage, "sd": sd, "radius_mean": float(radii[:, k].mean()),
                         "radius_sd": _sd(radii[:, k]), "mse_mean": float(mse.mean()), "mse_sd": _sd(mse),
                         "seconds": seconds, "coverage_type": coverage_type.value,
                         "coverage_median": float(np.median(per_replicate)),
                         "coverage_q25": float(np.quantile(per_replicate, 0.25)),
                         "coverage_q75": float(np.quantile(per_replicate, 0.75)),
                         "wilson_low": low, "wilson_high": high, "outside_wilson": not low <= 1. - alpha <= high})
            for a in range(count):
                raw.append({"scenario": config.scenario.name.value, "n": n, "alpha": alpha, "method": method.value,
                            "replicate": a, "coverage": per_replicate[a], "radius": radii[a, k], "mse": mse[a]})
    logger.info("finished coverage type %s cell with n=%d", coverage_type.value, n)
    return rows, raw


def estimate_coverage(config, coverage_type):
    """Coverage estimates of one type over every sample size of ``config``

    :returns: A :class:`CoverageReport` of kind ``type_<I|II|III|IV>``
    """
    coverage_type = CoverageType(coverage_type)
    scenario = build_scenario(config.scenario)
    rows, raw = [], []
    for n in config.n_values:
        cell_rows, cell_raw = _coverage_cell(config, scenario, coverage_type, n)
        rows += cell_rows
        raw += cell_raw
    return CoverageReport(f"type_{coverage_type.value}", pandas.DataFrame(rows), pandas.DataFrame(raw))


def estimate_type_I(config):
    """Marginal coverage: ``M`` replicate samples, each tested on one independent pair"""
    return estimate_coverage(config, CoverageType.I)


def estimate_type_II(config):
    """Coverage conditional on the sample: ``N`` replicate samples, each tested on ``M`` pairs"""
    return estimate_coverage(config, CoverageType.II)


def estimate_type_III(config):
    """Coverage conditional on ``X = x0``: ``M`` replicate samples, each tested on one draw of ``Y | X = x0``"""
    return estimate_coverage(config, CoverageType.III)


def estimate_type_IV(config):
    """Coverage conditional on the sample and on ``X = x0``"""
    return estimate_coverage(config, CoverageType.IV)


def _mse_replicate(config, scenario, n, a):
    stream = RngStream(config.seed).spawn(_MSE_KEY, n, a)
    dataset = scenario.generate(n, stream.spawn(0))
    tests = _draw_tests(scenario, config.test_size, stream.spawn(1))
    return {method: _method_result(config, method, dataset, tests, stream.spawn(2, k))
            for k, method in enumerate((BallMethod.OOB, BallMethod.SPLIT_CONFORMAL))}


def compare_mse(config):
    """Test MSE and radii of forests behind out-of-bag balls (full sample) and split-conformal balls (half sample)

    :returns: A :class:`CoverageReport` of kind ``mse`` with one row per ``(n, alpha, method)``
    """
    scenario = build_scenario(config.scenario)
    rows, raw = [], []
    for n in config.n_values:
        logger.info("MSE comparison, %s, n=%d", config.scenario.name.value, n)
        results = _run_replicates(config, _mse_replicate, config.replicates, config, scenario, n)
        for method in (BallMethod.OOB, BallMethod.SPLIT_CONFORMAL):
            mse = np.array([result[method]["mse"] for result in results])
            radii = np.array([result[method]["radii"] for result in results])
            seconds = _seconds(config, method, [result[method]["seconds"] for result in results])
            for k, alpha in enumerate(config.alphas):
                finite = radii[:, k][np.isfinite(radii[:, k])]
                rows.append({"scenario": config.scenario.name.value, "n": n, "alpha": alpha, "method": method.value,
                             "coverage": np.nan, "sd": np.nan,
                             "radius_mean": float(finite.mean()) if finite.size else np.inf,
                             "radius_sd": _sd(finite), "mse_mean": float(mse.mean()), "mse_sd": _sd(mse),
                             "seconds": seconds, "radius_median": float(np.median(radii[:, k])),
                             "training_size": n if method is BallMethod.OOB else n // 2})
            for a in range(config.replicates):
                raw.append({"n": n, "method": method.value, "replicate": a, "mse": mse[a]})
    return CoverageReport("mse", pandas.DataFrame(rows), pandas.DataFrame(raw))


def relative_volume_error(radius_error, q):
    """Relative volume error ``(1 + rho)^q - 1`` of Euclidean balls with relative radius error ``rho``"""
    return (1. + np.asarray(radius_error, dtype=float)) ** q - 1.


def _radius_replicate(config, scenario, n, a):
    stream = RngStream(config.seed).spawn(_RADIUS_KEY, scenario.spec.q, n, a)
    dataset = scenario.generate(n, stream.spawn(0))
    hyperparameters = _hyperparameters(config, dataset, stream.spawn(1))
    model = fit_forest(dataset, config.flavor, hyperparameters, stream.spawn(2))
    errors = compute_oob_errors(model)
    fitted = _split_conformal(config, dataset, stream.spawn(3))
    return (np.array([empirical_quantile(errors, alpha) for alpha in config.alphas]),
            np.array([fitted.radius(alpha) for alpha in config.alphas]))


def compare_radius_volume(config):
    """Relative radius and volume errors of split-conformal balls with respect to out-of-bag balls

    The multivariate Euclidean scenario is run for every response dimension in ``config.q_values``.
    """
    rows, raw = [], []
    for q in config.q_values:
        spec = replace(config.scenario, name=ScenarioName.EUCLIDEAN_MULTIVARIATE, q=int(q))
        scenario = build_scenario(spec)
        for n in config.n_values:
            logger.info("radius comparison, q=%d, n=%d", q, n)
            results = _run_replicates(config, _radius_replicate, config.replicates, config, scenario, n)
            oob = np.array([r[0] for r in results])
            sc = np.array([r[1] for r in results])
            with np.errstate(divide="ignore", invalid="ignore"):
                rho = (sc - oob) / oob
            volume = relative_volume_error(rho, q)
            for k, alpha in enumerate(config.alphas):
                rows.append({"q": q, "n": n, "alpha": alpha,
                             "radius_rel_mean": float(np.mean(rho[:, k])),
                             "radius_rel_median": float(np.median(rho[:, k])),
                             "radius_rel_q25": float(np.quantile(rho[:, k], 0.25)),
                             "radius_rel_q75": float(np.quantile(rho[:, k], 0.75)),
                             "volume_rel_mean": float(np.mean(volume[:, k])),
                             "volume_rel_median": float(np.median(volume[:, k]))})
                for a in range(config.replicates):
                    raw.append({"q": q, "n": n, "alpha": alpha, "replicate": a, "radius_oob": oob[a, k],
                                "radius_sc": sc[a, k], "radius_rel": rho[a, k], "volume_rel": volume[a, k]})
    return CoverageReport("radius_volume", pandas.DataFrame(rows), pandas.DataFrame(raw))


def interpolation_path(t, ai_mean, lc_mean, extrinsic_mean):
    """Candidate means along the piecewise-linear path extrinsic (t=-1), AI (t=0), LC (t=1), extrinsic (t=2)"""
    if t <= 0:
        return (1. + t) * ai_mean - t * extrinsic_mean
    if t <= 1:
        return (1. - t) * ai_mean + t * lc_mean
    return (2. - t) * lc_mean + (t - 1.) * extrinsic_mean


def default_scale_matrix(q):
    return SIGMA_1.copy() if q == 2 else ar1_covariance(q)


def validate_frechet_means(q=2, d=15, sigma=None, n_draws=LOSS_DRAWS, grid_size=LOSS_GRID_SIZE, rng=0,
                           ai_mean_factor=1.):
    """Normalized Fréchet loss curves of Wishart draws along a path through the closed-form means

    For each metric the loss at candidate ``M(t)`` is ``(F(M(t)) - F(M_metric)) / F(M_metric)`` where ``F`` is the
    Monte Carlo Fréchet functional. The grid has ``grid_size`` points in ``[-1, 2]``; the AI mean sits at ``t = 0``
    and the LC mean at ``t = 1``. An argmin is accepted within one grid step of its closed form, or within
    :data:`ARGMIN_STANDARD_ERRORS` standard errors of the sample minimizer when the draws are too few to resolve a
    single step.

    :param float ai_mean_factor: Multiplies the AI closed form; values other than 1 corrupt it for negative controls

    :returns: A :class:`CoverageReport` of kind ``frechet_loss`` whose ``extra`` holds the argmin locations
    """
    sigma = default_scale_matrix(q) if sigma is None else np.asarray(sigma, dtype=float)
    draws = sample_wishart(d, sigma, as_stream(rng), size=n_draws)
    ai_mean = ai_mean_factor * wishart_ai_constant(d, q) * sigma
    lc_mean = wishart_lc_mean(d, sigma)
    extrinsic_mean = d * sigma
    grid = np.linspace(-1., 2., grid_size)
    step = grid[1] - grid[0]
    curves, extra = {}, {"grid_step": float(step)}
    for metric, own_mean, own_t in ((SPDMetric.AI, ai_mean, 0.), (SPDMetric.LC, lc_mean, 1.)):
        space = space_for(SpaceDescriptor.parse(f"spd:{q}:{metric.value}"))
        reference = np.mean(space.distances(own_mean, draws) ** 2)
        functional = np.array([np.mean(space.distances(interpolation_path(t, ai_mean, lc_mean, extrinsic_mean),
                                                       draws) ** 2) for t in grid])
        curves[metric] = (functional - reference) / reference
        # sampling noise of the minimizer along the path, in units of t
        segment = min(space.distance(own_mean, interpolation_path(own_t - 1., ai_mean, lc_mean, extrinsic_mean)),
                      space.distance(own_mean, interpolation_path(own_t + 1., ai_mean, lc_mean, extrinsic_mean)))
        noise = math.sqrt(reference / (q * (q + 1) / 2. * n_draws)) / segment
        name = metric.value
        at_mean = np.mean(space.distances(interpolation_path(own_t, ai_mean, lc_mean, extrinsic_mean), draws) ** 2)
        extra[f"loss_at_mean_{name}"] = float((at_mean - reference) / reference)
        extra[f"argmin_t_{name}"] = float(grid[np.argmin(curves[metric])])
        extra[f"tolerance_{name}"] = max(float(step), ARGMIN_STANDARD_ERRORS * noise)
        extra[f"{name}_ok"] = abs(extra[f"argmin_t_{name}"] - own_t) <= extra[f"tolerance_{name}"]
    summary = pandas.DataFrame({"t": grid, "loss_ai": curves[SPDMetric.AI], "loss_lc": curves[SPDMetric.LC]})
    return CoverageReport("frechet_loss", summary, extra=extra)


def _spheroid_fit(config, train, test, descriptor, stream):
    """Medoid forest on one response metric: test errors in the sphere metric, radii, coverage and areas"""
    train, test = (Dataset(part.predictor_descriptor, descriptor, part.predictors, part.responses)
                   for part in (train, test))
    model = fit_forest(train, Flavor.MRF, config.hyperparameters(), stream.spawn(0))
    errors = compute_oob_errors(model)
    predictions = predict(model, test.predictors)
    sphere = space_for(SpaceDescriptor.parse("sphere:3"))
    squared = np.array([sphere.distance(p, y) ** 2 for p, y in zip(predictions, test.responses)])
    space = train.response_space
    distances = np.array([space.distance(p, y) for p, y in zip(predictions, test.responses)])
    out = {"squared_errors": squared, "radii": [], "covered": [], "areas": []}
    for k, alpha in enumerate(config.alphas):
        radius = empirical_quantile(errors, alpha)
        if descriptor.kind is SpaceKind.SPHEROID:
            areas = np.array([spheroid_ball_area(p, radius, descriptor.a, descriptor.c, stream.spawn(1, k, i),
                                                 config.area_draws)[0] for i, p in enumerate(predictions)])
        else:
            areas = np.full(len(predictions), 2. * math.pi * (1. - math.cos(min(radius, math.pi))))
        out["radii"].append(radius)
        out["covered"].append(distances < radius)
        out["areas"].append(areas)
    return out


def _spheroid_replicate(config, a):
    stream = RngStream(config.seed).spawn(_SPHEROID_KEY, a)
    spec = replace(config.scenario, name=ScenarioName.SPHERE_ANISOTROPIC, spheroid_a=None)
    dataset = build_scenario(spec).generate(spec.n, stream.spawn(0))
    permutation = stream.spawn(1).permutation(dataset.n)
    n_test = max(1, int(round(config.test_fraction * dataset.n)))
    train, test = dataset.subset(np.sort(permutation[n_test:])), dataset.subset(np.sort(permutation[:n_test]))
    results = {"sphere": _spheroid_fit(config, train, test, SpaceDescriptor.parse("sphere:3"), stream.spawn(2))}
    for k, a_axis in enumerate(config.spheroid_grid):
        if float(a_axis) == 1.:
            # the induced metric of the unit sphere is the sphere metric
            results[1.] = results["sphere"]
            continue
        descriptor = SpaceDescriptor(SpaceKind.SPHEROID, a=float(a_axis), c=1.)
        results[float(a_axis)] = _spheroid_fit(config, train, test, descriptor, stream.spawn(3, k))
    return results


def _paired_p_value(baseline, candidate, alternative):
    if np.allclose(baseline, candidate):
        return 1.
    return float(stats.ttest_rel(baseline, candidate, alternative=alternative).pvalue)


def spheroid_anisotropy_study(config):
    """Compare medoid forests using spheroid-induced response metrics against the sphere metric

    For every equatorial semi-axis ``a`` (polar semi-axis 1) and level ``alpha``: relative change of the test MSE
    (measured in the sphere metric) and of the mean ball area with respect to the sphere, Type II coverage, and
    one-sided paired t-test p-values (MSE larger, area smaller than on the sphere) corrected with the
    Benjamini-Yekutieli procedure.
    """
    logger.info("spheroid anisotropy study over a in %s with %d replicates", config.spheroid_grid,
                config.replicates)
    results = _run_replicates(config, _spheroid_replicate, config.replicates, config)

    def pooled(key, name, k=None):
        values = [r[key][name] if k is None else r[key][name][k] for r in results]
        return np.concatenate([np.atleast_1d(v) for v in values])

    rows = []
    for k, alpha in enumerate(config.alphas):
        base_mse = pooled("sphere", "squared_errors")
        base_area = pooled("sphere", "areas", k)
        for a_axis in config.spheroid_grid:
            key = float(a_axis)
            mse = pooled(key, "squared_errors")
            area = pooled(key, "areas", k)
            rows.append({"a": key, "c": 1., "alpha": alpha,
                         "delta_mse": 100. * (mse.mean() / base_mse.mean() - 1.),
                         "delta_area": 100. * (area.mean() / base_area.mean() - 1.),
                         "coverage": float(pooled(key, "covered", k).mean()),
                         "radius_mean": float(np.mean([r[key]["radii"][k] for r in results])),
                         "p_mse": _paired_p_value(base_mse, mse, "less"),
                         "p_area": _paired_p_value(base_area, area, "greater")})
    summary = pandas.DataFrame(rows)
    for column in ("p_mse", "p_area"):
        summary[f"{column}_adjusted"] = np.nan
        for alpha in config.alphas:
            mask = summary["alpha"] == alpha
            summary.loc[mask, f"{column}_adjusted"] = stats.false_discovery_control(
                summary.loc[mask, column].to_numpy(), method="by")
    return CoverageReport("spheroid", summary)
