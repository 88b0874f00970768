"""Keyword decks describing Monte Carlo experiments

A deck is a plain text file::

    # Euclidean coverage at desk scale
    *SCENARIO
    name = euclidean_linear, sigma = 0.8660254
    *FOREST
    flavor = rfwlcfr, n_trees = 200, min_split_size = 5
    *EXPERIMENT
    alphas = 0.01 0.05 0.10
    n_values = 50; 200
    experiments = I II
    seed = 12
    *OUTPUT
    prefix = results/euclidean

Keyword lines open blocks; inside a block, lines hold ``key = value`` pairs separated by commas and list values are
separated by whitespace or semicolons.
"""

import logging
import os

from .balls import BallMethod
from .errors import ConfigurationError
from .forest import Flavor
from .harness import ExperimentConfig
from .scenarios import ScenarioSpec

logger = logging.getLogger(__name__)

EXPERIMENTS = ("I", "II", "III", "IV", "mse", "radius_volume", "spheroid")


def _integer(text):
    return int(text)


def _real(text):
    return float(text)


def _text(text):
    return text


def _optional_real(text):
    return None if text.lower() in ("none", "sphere") else float(text)


def _boolean(text):
    values = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}
    try:
        return values[text.lower()]
    except KeyError:
        raise ValueError(f"expected true or false, got '{text}'")


def _optional_integer(text):
    return None if text.lower() in ("none", "all") else int(text)


def _split_list(text):
    return [item for item in text.replace(";", " ").split() if item]


def _reals(text):
    return tuple(float(item) for item in _split_list(text))


def _integers(text):
    return tuple(int(item) for item in _split_list(text))


def _texts(text):
    return tuple(_split_list(text))


class ExperimentDeck(object):
    """Reads an experiment deck and assembles an :class:`ExperimentConfig`

    :param str filename: The path to the deck
    """

    # key -> converter, per block
    scenario_keys = {"name": _text, "n": _integer, "sigma": _real, "q": _integer, "kappa": _real, "d": _real,
                     "metric": _text, "theta_law": _text, "grid_size": _integer, "gamma0": _real, "sigma0": _real,
                     "sigma_lon": _real, "sigma_lat": _real, "drift": _real, "spheroid_a": _optional_real,
                     "spheroid_c": _real}
    forest_keys = {"flavor": _text, "n_trees": _integer, "mtry": _optional_integer, "min_split_size": _integer,
                   "tune": _boolean}
    experiment_keys = {"alphas": _reals, "n_values": _integers, "replicates": _integer, "mc_size": _integer,
                       "bootstrap": _integer, "x0": _reals, "methods": _texts, "test_size": _integer,
                       "q_values": _integers, "spheroid_grid": _reals, "area_draws": _integer,
                       "test_fraction": _real, "seed": _integer, "threads": _integer, "full_scale": _boolean,
                       "experiments": _texts}
    output_keys = {"prefix": _text, "record_timings": _boolean}

    def __init__(self, filename):
        self.filename = filename
        self.scenario = {}
        self.forest = {}
        self.experiment = {}
        self.output = {}
        self.lines = {}  # "*BLOCK.key" -> line number

        self.keywords = ["*SCENARIO", "*FOREST", "*EXPERIMENT", "*OUTPUT"]
        self.parse_fxns = [self.parse_scenario, self.parse_forest, self.parse_experiment, self.parse_output]

    def __repr__(self):
        return "ExperimentDeck({0})".format(self.filename)

    def read_input(self):
        """Read and parse the deck

        :returns: ``self``
        """
        logger.info("=" * 20 + " EXPERIMENT DECK " + "=" * 20)
        logger.info("reading experiment deck %s", self.filename)
        try:
            with open(self.filename) as f:
                lines = f.readlines()
        except OSError as err:
            raise ConfigurationError(f"cannot read experiment deck {self.filename}: {err}")
        self.parse_lines(lines)
        logger.info("=" * 16 + " EXPERIMENT DECK COMPLETED " + "=" * 14)
        return self

    def parse_lines(self, lines):
        parse_fxn = None
        for linenum, line in enumerate(lines, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            found, fxn, line = self.check_keywords(linenum, line)
            if found:
                parse_fxn = fxn
            elif parse_fxn is None:
                raise ConfigurationError(f"On line {linenum}, expected one of {', '.join(self.keywords)} before "
                                         f"'{line}'")
            parse_fxn(linenum, line)
        if not self.scenario.get("name"):
            raise ConfigurationError(f"{self.filename}: the required key *SCENARIO.name is missing")
        return self

    def check_keywords(self, linenum, line):
        """Check a line for a block keyword

        :param int linenum: The number of the line
        :param str line: The stripped line

        :returns: ``(found, parsing function, rest of the line)``
        """
        if not line.startswith("*"):
            return False, None, line
        keyword = line.split(",", 1)[0].strip().upper()
        for key, fxn in zip(self.keywords, self.parse_fxns):
            if keyword == key:
                logger.debug("keyword %s found on line %d", key, linenum)
                return True, fxn, line[len(key):].lstrip(" ,")
        raise ConfigurationError(f"On line {linenum}, unknown keyword '{keyword}'")

    def _parse_pairs(self, linenum, line, block, keys, store):
        if not line:
            return
        for pair in line.split(","):
            if "=" not in pair:
                raise ConfigurationError(f"On line {linenum}, expected key = value in {block}, got '{pair.strip()}'")
            key, value = (part.strip() for part in pair.split("=", 1))
            path = f"{block}.{key}"
            if key not in keys:
                raise ConfigurationError(f"On line {linenum}, unknown key {path}")
            if key in store:
                raise ConfigurationError(f"On line {linenum}, {path} is already set on line {self.lines[path]}")
            try:
                store[key] = keys[key](value)
            except ValueError as err:
                raise ConfigurationError(f"On line {linenum}, malformed value '{value}' for {path}: {err}")
            self.lines[path] = linenum

    def parse_scenario(self, linenum, line):
        self._parse_pairs(linenum, line, "*SCENARIO", self.scenario_keys, self.scenario)

    def parse_forest(self, linenum, line):
        self._parse_pairs(linenum, line, "*FOREST", self.forest_keys, self.forest)

    def parse_experiment(self, linenum, line):
        self._parse_pairs(linenum, line, "*EXPERIMENT", self.experiment_keys, self.experiment)

    def parse_output(self, linenum, line):
        self._parse_pairs(linenum, line, "*OUTPUT", self.output_keys, self.output)

    def _build(self, block, builder, key=None):
        """Run a constructor, attributing its errors to the deck line of the key they name"""
        try:
            return builder()
        except ValueError as err:
            message = str(err)
            leading = message.split(" ", 1)[0]
            path = next((p for p in self.lines if p.endswith(f".{leading}")), f"{block}.{key}")
            where = f"On line {self.lines[path]}, " if path in self.lines else f"{self.filename}: "
            raise ConfigurationError(f"{where}invalid {path}: {message}") from err

    @property
    def experiments(self):
        requested = self.experiment.get("experiments", ("I",))
        for name in requested:
            if name not in EXPERIMENTS:
                line = self.lines.get("*EXPERIMENT.experiments")
                raise ConfigurationError(f"On line {line}, unknown experiment '{name}' in *EXPERIMENT.experiments; "
                                         f"expected a subset of {', '.join(EXPERIMENTS)}")
        return tuple(requested)

    @property
    def prefix(self):
        prefix = self.output.get("prefix")
        if prefix is None:
            prefix = os.path.splitext(os.path.basename(str(self.filename)))[0]
        return prefix

    @property
    def full_scale(self):
        return self.experiment.get("full_scale", False)

    def config(self, seed=None, n_jobs=None, full_scale=None):
        """The :class:`ExperimentConfig` of the deck

        :param int seed: Overrides ``*EXPERIMENT.seed`` when not None
        :param int n_jobs: Overrides ``*EXPERIMENT.threads`` when not None
        :param bool full_scale: Overrides ``*EXPERIMENT.full_scale`` when not None
        """
        spec = self._build("*SCENARIO", lambda: ScenarioSpec(**self.scenario), "name")
        experiment = dict(self.experiment)
        for key in ("threads", "full_scale", "experiments"):
            experiment.pop(key, None)
        if "n_values" not in experiment:
            experiment["n_values"] = (spec.n,)
        if "methods" in experiment:
            experiment["methods"] = tuple(self._build("*EXPERIMENT", lambda: BallMethod(m), "methods")
                                          for m in experiment["methods"])
        forest = dict(self.forest)
        if "flavor" in forest:
            forest["flavor"] = self._build("*FOREST", lambda: Flavor(forest["flavor"].lower()), "flavor")
        if seed is not None:
            experiment["seed"] = seed
        experiment["n_jobs"] = n_jobs if n_jobs is not None else self.experiment.get("threads", 1)
        settings = dict(scenario=spec, **forest, **experiment)
        if "record_timings" in self.output:
            settings["record_timings"] = self.output["record_timings"]
        config = self._build("*EXPERIMENT", lambda: ExperimentConfig(**settings))
        if self.full_scale if full_scale is None else full_scale:
            config = config.full_scale()
        return config
