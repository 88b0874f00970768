import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from frechet_forest.forest import Flavor, ForestHyperparameters, fit_forest
from frechet_forest.sampling import RngStream
from frechet_forest.scenarios import ScenarioSpec, generate_scenario


@pytest.fixture
def stream():
    """A fresh random stream with a fixed seed"""
    return RngStream(20240101)


@pytest.fixture(scope="session")
def euclidean_dataset():
    """A small sample of the Euclidean linear scenario"""
    dataset, _ = generate_scenario(ScenarioSpec("euclidean_linear", n=60), RngStream(7))
    return dataset


@pytest.fixture(scope="session")
def sphere_dataset():
    """A small sample of the great-circle sphere scenario"""
    dataset, _ = generate_scenario(ScenarioSpec("sphere_great_circle", n=40, kappa=50.), RngStream(11))
    return dataset


@pytest.fixture(scope="session")
def euclidean_forest(euclidean_dataset):
    """A small weighted forest fitted on :func:`euclidean_dataset`"""
    return fit_forest(euclidean_dataset, Flavor.RFWLCFR, ForestHyperparameters(n_trees=40, min_split_size=5), rng=3)
