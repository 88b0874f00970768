"""Command line interface

Data go to files or standard output; progress and errors go to standard error. Every subcommand accepts ``--seed``
and ``--threads``; when they are absent the ``FRECHET_FOREST_SEED`` and ``FRECHET_FOREST_THREADS`` environment
variables apply, then the experiment deck, then the defaults.
"""

import argparse
import logging
import os
import sys

import numpy as np
import pandas

from . import __version__
from .balls import BallMethod, boundary_sample, compute_oob_errors, fit_split_conformal, oob_ball
from .dataset import metadata_line, read_dataset, read_queries, response_columns, write_csv, write_dataset
from .errors import ConfigurationError, FrechetForestError
from .forest import Flavor, ForestHyperparameters, fit_forest, predict, tune_hyperparameters
from .harness import compare_mse, compare_radius_volume, estimate_coverage, spheroid_anisotropy_study
from .input_parser import ExperimentDeck
from .metric import SpaceDescriptor
from .model_io import load_model, save_model
from .sampling import RngStream
from .scenarios import ScenarioName, ScenarioSpec, generate_scenario
from .validation import geometry_suite, means_suite, require

logger = logging.getLogger(__name__)

SEED_VARIABLE = "FRECHET_FOREST_SEED"
THREADS_VARIABLE = "FRECHET_FOREST_THREADS"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
DEFAULT_SEED = 0


def _environment_integer(name):
    value = os.environ.get(name)
    if value is None or not value.strip():
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigurationError(f"environment variable {name} must be an integer, got '{value}'")


def resolve_seed(args, deck_seed=None):
    """The seed by precedence: flag, environment, deck, default"""
    for value in (args.seed, _environment_integer(SEED_VARIABLE), deck_seed):
        if value is not None:
            return value
    return DEFAULT_SEED


def resolve_threads(args, deck_threads=None):
    """The worker count by precedence: flag, environment, deck, all cores"""
    for value in (args.threads, _environment_integer(THREADS_VARIABLE), deck_threads):
        if value is not None:
            if value == 0:
                raise ConfigurationError("the thread count cannot be 0")
            return value
    return -1


def _output(path):
    return sys.stdout if path in (None, "-") else path


def _metadata(seed, **extra):
    return metadata_line(__version__, seed, **extra)


def cmd_fit(args):
    """Fit a forest on a dataset CSV and write a model file"""
    seed = resolve_seed(args)
    n_jobs = resolve_threads(args)
    dataset = read_dataset(args.data, args.predictors, args.response)
    flavor = Flavor(args.flavor)
    hyperparameters = ForestHyperparameters(args.n_trees, args.mtry, args.min_split_size)
    extra = {"tuned": bool(args.tune), "data": os.path.basename(str(args.data))}
    if args.tune:
        hyperparameters = tune_hyperparameters(dataset, flavor, rng=seed, base=hyperparameters, n_jobs=n_jobs)
        extra["tuned_min_split_size"] = hyperparameters.min_split_size
        extra["tuned_mtry"] = hyperparameters.mtry
    model = fit_forest(dataset, flavor, hyperparameters, seed, n_jobs)
    errors = compute_oob_errors(model)
    extra["oob_mse"] = float(np.mean(errors.errors ** 2))
    save_model(model, args.out, extra)
    print(f"oob_mse={extra['oob_mse']!r} oob_observations={len(errors)} dropped={errors.dropped.size} "
          f"n_trees={model.n_trees} mtry={model.hyperparameters.mtry} "
          f"min_split_size={model.hyperparameters.min_split_size}")


def _queries(args, model):
    blocks = read_queries(args.queries, args.predictors, expected_descriptor=model.predictor_descriptor)
    return blocks, len(blocks[0])


def cmd_predict(args):
    """Forest predictions at query points"""
    model, _ = load_model(args.model)
    blocks, m = _queries(args, model)
    predictions = predict(model, blocks)
    flat = model.response_space.flatten(predictions) if m else np.empty((0, model.response_descriptor.size))
    frame = pandas.DataFrame(flat, columns=response_columns(model.response_descriptor))
    frame.insert(0, "query", np.arange(m))
    write_csv(frame, _output(args.out), _metadata(model.seed, response=model.response_descriptor))


def cmd_ball(args):
    """Prediction balls at query points, one row per (query, alpha)"""
    seed = resolve_seed(args)
    model, _ = load_model(args.model)
    blocks, m = _queries(args, model)
    method = BallMethod(args.method)
    columns = ["query", "method", "alpha", "radius", "descriptor"] + [
        f"c_{k + 1}" for k in range(model.response_descriptor.size)]
    rows = []
    if m:
        if method is BallMethod.OOB:
            errors = compute_oob_errors(model)
            make = lambda x, alpha: oob_ball(model, x, alpha, errors)
        else:
            fitted = fit_split_conformal(model.training, model.flavor, model.hyperparameters, seed,
                                         resolve_threads(args))
            make = fitted.ball
        for q in range(m):
            x = [block[q] for block in blocks]
            for alpha in args.alpha:
                rows.append(dict(query=q, **make(x, alpha).record()))
    frame = pandas.DataFrame(rows, columns=columns)
    write_csv(frame, _output(args.out), _metadata(seed, method=method.value))


def cmd_oob_errors(args):
    """Out-of-bag errors and predictions of the training observations"""
    model, _ = load_model(args.model)
    errors = compute_oob_errors(model)
    flat = model.response_space.flatten(errors.predictions) if len(errors) else np.empty(
        (0, model.response_descriptor.size))
    frame = pandas.DataFrame(flat, columns=[f"prediction_{k + 1}" for k in range(flat.shape[1])])
    frame.insert(0, "error", errors.errors)
    frame.insert(0, "index", errors.indices)
    write_csv(frame, _output(args.out), _metadata(model.seed, dropped=errors.dropped.size))


SCENARIO_OPTIONS = ("n", "sigma", "q", "kappa", "d", "metric", "theta_law", "grid_size", "gamma0", "sigma0",
                    "sigma_lon", "sigma_lat", "drift", "spheroid_a", "spheroid_c")


def cmd_simulate(args):
    """Draw a dataset from a scenario"""
    if args.deck:
        deck = ExperimentDeck(args.deck).read_input()
        spec = deck.config(seed=DEFAULT_SEED, n_jobs=1).scenario
        seed = resolve_seed(args, deck.experiment.get("seed"))
    else:
        if args.scenario is None:
            raise ConfigurationError("simulate needs --scenario or --deck")
        settings = {key: getattr(args, key) for key in SCENARIO_OPTIONS if getattr(args, key) is not None}
        spec = ScenarioSpec(args.scenario, **settings)
        seed = resolve_seed(args)
    dataset, _ = generate_scenario(spec, RngStream(seed))
    write_dataset(dataset, _output(args.out), seed=seed, scenario=spec.name.value)
    logger.info("simulated %d observations of %s", dataset.n, spec.describe())


def cmd_coverage(args):
    """Run the experiments of a deck and write one CSV pair per experiment"""
    deck = ExperimentDeck(args.deck).read_input()
    seed = resolve_seed(args, deck.experiment.get("seed"))
    n_jobs = resolve_threads(args, deck.experiment.get("threads"))
    config = deck.config(seed=seed, n_jobs=n_jobs, full_scale=True if args.full_scale else None)
    prefix = args.prefix or deck.prefix
    directory = os.path.dirname(prefix)
    if directory:
        os.makedirs(directory, exist_ok=True)
    runners = {"mse": compare_mse, "radius_volume": compare_radius_volume, "spheroid": spheroid_anisotropy_study}
    for name in deck.experiments:
        report = runners[name](config) if name in runners else estimate_coverage(config, name)
        for path in report.write(prefix, config):
            print(path)


def _print_checks(results):
    for result in results:
        print(result)
    require(results)


def cmd_validate_means(args):
    """Loss curves and closed-form mean checks; exits 1 when a check fails"""
    descriptor = SpaceDescriptor.parse(args.space)
    if descriptor.kind.value != "spd":
        raise ConfigurationError(f"--space must be an SPD space, got {descriptor}")
    _print_checks(means_suite(descriptor.dim, args.d, args.draws, args.grid, resolve_seed(args),
                              ai_mean_factor=args.corrupt_ai_mean))


def cmd_validate_geometry(args):
    """Metric axioms and geometric identities; exits 1 when a check fails"""
    _print_checks(geometry_suite(args.triples, resolve_seed(args)))


def cmd_validate(args):
    if args.suite == "means":
        cmd_validate_means(args)
    else:
        cmd_validate_geometry(args)


def cmd_boundary_sample(args):
    """Points on the boundaries of the prediction balls at query points"""
    seed = resolve_seed(args)
    model, _ = load_model(args.model)
    blocks, m = _queries(args, model)
    errors = compute_oob_errors(model) if m else None
    size = model.response_descriptor.size
    frames = []
    for q in range(m):
        ball = oob_ball(model, [block[q] for block in blocks], args.alpha, errors)
        points = model.response_space.flatten(boundary_sample(ball, args.count, RngStream(seed, (q,))))
        frame = pandas.DataFrame(points, columns=[f"y_{k + 1}" for k in range(size)])
        frame.insert(0, "query", q)
        frames.append(frame)
    frame = pandas.concat(frames, ignore_index=True) if frames else pandas.DataFrame(
        columns=["query"] + [f"y_{k + 1}" for k in range(size)])
    write_csv(frame, _output(args.out), _metadata(seed, alpha=args.alpha))


def _common_options():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"root seed (default: ${SEED_VARIABLE} or 0)")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker processes (default: ${THREADS_VARIABLE} or all cores)")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log debugging messages")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")
    return common


def _descriptor_options(parser, required=False):
    parser.add_argument("--predictors", type=SpaceDescriptor.parse, required=required,
                        help="predictor descriptor, e.g. product[euclidean:1,sphere:3]")


def build_parser():
    common = _common_options()
    parser = argparse.ArgumentParser(prog="frechet-forest", description="Random forests and prediction balls for "
                                     "responses in metric spaces")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    fit = commands.add_parser("fit", parents=[common], help=cmd_fit.__doc__)
    fit.add_argument("data", help="dataset CSV")
    _descriptor_options(fit)
    fit.add_argument("--response", type=SpaceDescriptor.parse, help="response descriptor, e.g. spd:2:ai")
    fit.add_argument("--flavor", choices=[flavor.value for flavor in Flavor], default=Flavor.RFWLCFR.value)
    fit.add_argument("--n-trees", type=int, default=200)
    fit.add_argument("--mtry", type=int, default=None)
    fit.add_argument("--min-split-size", type=int, default=5)
    fit.add_argument("--tune", action="store_true", help="cross-validate the minimum split size and mtry")
    fit.add_argument("-o", "--out", required=True, help="model file")
    fit.set_defaults(func=cmd_fit)

    for name, func in (("predict", cmd_predict), ("oob-errors", cmd_oob_errors)):
        sub = commands.add_parser(name, parents=[common], help=func.__doc__)
        sub.add_argument("model", help="model file")
        if name == "predict":
            sub.add_argument("queries", help="query CSV")
            _descriptor_options(sub)
        sub.add_argument("-o", "--out", default="-", help="output CSV (default: standard output)")
        sub.set_defaults(func=func)

    ball = commands.add_parser("ball", parents=[common], help=cmd_ball.__doc__)
    ball.add_argument("model", help="model file")
    ball.add_argument("queries", help="query CSV")
    _descriptor_options(ball)
    ball.add_argument("--alpha", type=float, nargs="+", default=[0.1])
    ball.add_argument("--method", choices=[BallMethod.OOB.value, BallMethod.SPLIT_CONFORMAL.value],
                      default=BallMethod.OOB.value)
    ball.add_argument("-o", "--out", default="-")
    ball.set_defaults(func=cmd_ball)

    boundary = commands.add_parser("boundary-sample", parents=[common], help=cmd_boundary_sample.__doc__)
    boundary.add_argument("model", help="model file")
    boundary.add_argument("queries", help="query CSV")
    _descriptor_options(boundary)
    boundary.add_argument("--alpha", type=float, default=0.1)
    boundary.add_argument("--count", type=int, default=64)
    boundary.add_argument("-o", "--out", default="-")
    boundary.set_defaults(func=cmd_boundary_sample)

    simulate = commands.add_parser("simulate", parents=[common], help=cmd_simulate.__doc__)
    simulate.add_argument("--scenario", choices=[name.value for name in ScenarioName])
    simulate.add_argument("--deck", help="take the scenario from an experiment deck")
    for key in SCENARIO_OPTIONS:
        kind = str if key in ("metric", "theta_law") else int if key in ("n", "q", "grid_size") else float
        simulate.add_argument("--" + key.replace("_", "-"), dest=key, type=kind, default=None)
    simulate.add_argument("-o", "--out", default="-")
    simulate.set_defaults(func=cmd_simulate)

    coverage = commands.add_parser("coverage", parents=[common], help=cmd_coverage.__doc__)
    coverage.add_argument("deck", help="experiment deck")
    coverage.add_argument("--full-scale", action="store_true", help="M = N = 1000 and K = 500")
    coverage.add_argument("--prefix", help="output prefix (default: *OUTPUT.prefix)")
    coverage.set_defaults(func=cmd_coverage)

    def means_options(sub):
        sub.add_argument("--space", default="spd:2:ai", help="SPD space whose size sets q")
        sub.add_argument("--d", type=float, default=15., help="Wishart degrees of freedom")
        sub.add_argument("--draws", type=int, default=25000)
        sub.add_argument("--grid", type=int, default=600)
        sub.add_argument("--corrupt-ai-mean", type=float, default=1., help=argparse.SUPPRESS)

    def geometry_options(sub):
        sub.add_argument("--triples", type=int, default=10000)

    means = commands.add_parser("validate-means", parents=[common], help=cmd_validate_means.__doc__)
    means_options(means)
    means.set_defaults(func=cmd_validate_means)
    geometry = commands.add_parser("validate-geometry", parents=[common], help=cmd_validate_geometry.__doc__)
    geometry_options(geometry)
    geometry.set_defaults(func=cmd_validate_geometry)
    validate = commands.add_parser("validate", parents=[common], help="run the means or geometry checks")
    validate.add_argument("suite", choices=["means", "geometry"])
    means_options(validate)
    geometry_options(validate)
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    """Entry point of the ``frechet-forest`` command

    :returns: The process exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else 2
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    try:
        args.func(args)
    except FrechetForestError as err:
        logger.error("%s", err)
        return err.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
