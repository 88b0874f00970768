import argparse

import numpy as np
import pandas
import pytest

from frechet_forest.cli import SEED_VARIABLE, THREADS_VARIABLE, main, resolve_seed, resolve_threads
from frechet_forest.errors import ConfigurationError

QUERIES = "x1_1,x1_2\n1.0,0.0\n0.0,1.0\n-0.6,0.8\n"


def _read(path):
    return pandas.read_csv(path, comment="#")


@pytest.fixture(scope="module")
def sphere_model(tmp_path_factory):
    """A dataset drawn and a forest fitted through the command line"""
    directory = tmp_path_factory.mktemp("cli")
    data, model = directory / "data.csv", directory / "model.json"
    assert main(["simulate", "--scenario", "sphere_great_circle", "--n", "40", "--seed", "3", "-o",
                 str(data)]) == 0
    assert main(["fit", str(data), "--n-trees", "12", "--min-split-size", "3", "--seed", "4", "--threads", "1",
                 "-o", str(model)]) == 0
    queries = directory / "queries.csv"
    queries.write_text(QUERIES)
    return directory


def test_fit_summary(sphere_model, capsys):
    """
    Test that fitting prints the out-of-bag summary and writes a model file
    """

    directory = sphere_model

    assert main(["fit", str(directory / "data.csv"), "--n-trees", "5", "--seed", "1", "--threads", "1", "-o",
                 str(directory / "small.json")]) == 0

    out = capsys.readouterr().out
    assert out.startswith("oob_mse=")
    assert "n_trees=5" in out
    assert (directory / "small.json").exists()


def test_predict(sphere_model):
    """
    Test that predictions are unit vectors, one row per query
    """

    out = sphere_model / "predictions.csv"

    assert main(["predict", str(sphere_model / "model.json"), str(sphere_model / "queries.csv"), "-o",
                 str(out)]) == 0

    frame = _read(out)
    assert list(frame.columns) == ["query", "y_1", "y_2", "y_3"]
    assert np.allclose(np.linalg.norm(frame[["y_1", "y_2", "y_3"]].to_numpy(), axis=1), 1.)
    assert out.read_text().startswith("# frechet-forest ")


def test_ball(sphere_model):
    """
    Test that balls are written per query and level, with wider balls at smaller levels
    """

    out = sphere_model / "balls.csv"

    assert main(["ball", str(sphere_model / "model.json"), str(sphere_model / "queries.csv"), "--alpha", "0.1",
                 "0.5", "-o", str(out)]) == 0

    frame = _read(out)
    assert len(frame) == 6
    assert set(frame["method"]) == {"oob"}
    assert list(frame.columns[:5]) == ["query", "method", "alpha", "radius", "descriptor"]
    for _, rows in frame.groupby("query"):
        radius = dict(zip(rows["alpha"], rows["radius"]))
        assert radius[0.1] >= radius[0.5]


def test_split_conformal_ball(sphere_model):
    """
    Test split-conformal balls from the training data stored in the model
    """

    out = sphere_model / "sc.csv"

    assert main(["ball", str(sphere_model / "model.json"), str(sphere_model / "queries.csv"), "--method",
                 "split_conformal", "--seed", "2", "--threads", "1", "-o", str(out)]) == 0

    frame = _read(out)
    assert set(frame["method"]) == {"split_conformal"}
    assert (frame["radius"] > 0.).all()


def test_oob_errors_and_boundary(sphere_model):
    """
    Test the out-of-bag error table and boundary samples
    """

    errors, boundary = sphere_model / "errors.csv", sphere_model / "boundary.csv"

    assert main(["oob-errors", str(sphere_model / "model.json"), "-o", str(errors)]) == 0
    assert main(["boundary-sample", str(sphere_model / "model.json"), str(sphere_model / "queries.csv"), "--count",
                 "5", "-o", str(boundary)]) == 0

    frame = _read(errors)
    assert list(frame.columns[:2]) == ["index", "error"]
    assert (frame["error"] >= 0.).all()
    points = _read(boundary)
    assert len(points) == 15
    assert np.allclose(np.linalg.norm(points[["y_1", "y_2", "y_3"]].to_numpy(), axis=1), 1.)


def test_empty_queries(sphere_model):
    """
    Test that a header-only query file gives a header-only result
    """

    queries, out = sphere_model / "empty.csv", sphere_model / "empty_predictions.csv"
    queries.write_text("x1_1,x1_2\n")

    assert main(["predict", str(sphere_model / "model.json"), str(queries), "-o", str(out)]) == 0
    assert main(["ball", str(sphere_model / "model.json"), str(queries), "-o", str(sphere_model / "b.csv")]) == 0

    assert len(_read(out)) == 0
    assert list(_read(out).columns) == ["query", "y_1", "y_2", "y_3"]
    assert len(_read(sphere_model / "b.csv")) == 0


data = []

data += [("x1_1,x1_2\n1.0,0.0\n1.0,1.0\n", [], 3)]
data += [("x1_1\n0.5\n", [], 5)]
data += [("x1_1,x1_2\n1.0,zero\n", [], 2)]
data += [("x1_1,x1_2\n3.0,4.0\n", ["--predictors", "euclidean:2"], 5)]
data += [("# frechet-forest 0.1.0 predictors=product[euclidean:2]\nx1_1,x1_2\n3.0,4.0\n", [], 5)]
data += [("# frechet-forest 0.1.0 predictors=product[sphere:2]\nx1_1,x1_2\n0.6,0.8\n", [], 0)]


@pytest.mark.parametrize("text, options, code", data)
def test_bad_queries(text, options, code, sphere_model):
    """
    Test the exit codes of invalid, mismatched and malformed queries

    :param str text: The query file
    :param list options: Extra command line options
    :param int code: The expected exit code
    """

    queries = sphere_model / "bad.csv"
    queries.write_text(text)

    assert main(["predict", str(sphere_model / "model.json"), str(queries), "-o",
                 str(sphere_model / "bad_out.csv")] + options) == code


def test_invalid_training_row(sphere_model):
    """
    Test that a response off the sphere stops fitting with the invalid point exit code
    """

    lines = (sphere_model / "data.csv").read_text().splitlines()
    values = lines[3].split(",")
    values[-1] = str(float(values[-1]) + 0.5)
    lines[3] = ",".join(values)
    bad = sphere_model / "bad_data.csv"
    bad.write_text("\n".join(lines) + "\n")

    assert main(["fit", str(bad), "--n-trees", "5", "-o", str(sphere_model / "bad.json")]) == 3
    assert not (sphere_model / "bad.json").exists()


data = []

data += [(["fit"])]
data += [(["fit", "data.csv", "-o", "model.json", "--threads", "0"])]
data += [(["simulate", "--scenario", "torus"])]
data += [(["predict", "model.json", "queries.csv", "--predictors", "circle:2"])]
data += [(["simulate", "--scenario", "euclidean_linear", "--sigma", "-1"])]


@pytest.mark.parametrize("argv", data)
def test_usage_errors(argv, tmp_path, monkeypatch):
    """
    Test that bad options exit with the configuration exit code

    :param list argv: The command line
    """

    monkeypatch.chdir(tmp_path)
    (tmp_path / "data.csv").write_text("x1_1,y_1\n0.0,1.0\n1.0,2.0\n")

    assert main(argv) == 2


def test_seed_precedence(monkeypatch):
    """
    Test the precedence of flags, environment variables, decks and defaults
    """

    monkeypatch.delenv(SEED_VARIABLE, raising=False)
    monkeypatch.delenv(THREADS_VARIABLE, raising=False)
    unset = argparse.Namespace(seed=None, threads=None)

    assert resolve_seed(unset) == 0
    assert resolve_seed(unset, deck_seed=7) == 7
    assert resolve_threads(unset) == -1
    monkeypatch.setenv(SEED_VARIABLE, "11")
    monkeypatch.setenv(THREADS_VARIABLE, "3")
    assert resolve_seed(unset, deck_seed=7) == 11
    assert resolve_threads(unset, deck_threads=2) == 3
    assert resolve_seed(argparse.Namespace(seed=5, threads=None), deck_seed=7) == 5
    monkeypatch.setenv(SEED_VARIABLE, "eleven")
    with pytest.raises(ConfigurationError):
        resolve_seed(unset)
    with pytest.raises(ConfigurationError):
        resolve_threads(argparse.Namespace(seed=None, threads=0))


def test_simulate_reproducible(tmp_path):
    """
    Test that a seed reproduces a simulated dataset
    """

    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (first, second):
        assert main(["simulate", "--scenario", "spd_wishart_interp", "--n", "10", "--metric", "lc", "--seed", "8",
                     "-o", str(path)]) == 0

    assert first.read_text() == second.read_text()
    assert "scenario=spd_wishart_interp" in first.read_text().splitlines()[0]


def test_coverage_deck(tmp_path, capsys):
    """
    Test that a deck runs its experiments and reports the written files
    """

    deck = tmp_path / "small.inp"
    deck.write_text("*SCENARIO\nname = euclidean_linear\n*FOREST\nn_trees = 6, min_split_size = 3\n*EXPERIMENT\n"
                    "alphas = 0.1, n_values = 20, replicates = 2, mc_size = 4, bootstrap = 3\nexperiments = I II\n"
                    f"*OUTPUT\nprefix = {tmp_path / 'out' / 'small'}\n")

    assert main(["coverage", str(deck), "--threads", "1", "--seed", "2"]) == 0

    printed = capsys.readouterr().out.split()
    assert len(printed) == 4
    assert all(path.endswith(".csv") for path in printed)
    summary = _read(tmp_path / "out" / "small_type_II.csv")
    assert list(summary["alpha"]) == [0.1]
    assert "seed=2" in (tmp_path / "out" / "small_type_I.csv").read_text().splitlines()[0]


@pytest.mark.slow
def test_validate_means_negative_control(capsys):
    """
    Test that a corrupted affine-invariant mean makes the means suite exit with status 1
    """

    assert main(["validate-means", "--draws", "3000", "--grid", "61", "--corrupt-ai-mean", "1.5"]) == 1

    out = capsys.readouterr().out
    assert "FAIL affine-invariant loss argmin" in out
    assert "PASS log-Cholesky loss argmin" in out


@pytest.mark.slow
def test_validate_geometry(capsys):
    """
    Test that the geometry suite passes
    """

    assert main(["validate", "geometry", "--triples", "200"]) == 0

    assert "FAIL" not in capsys.readouterr().out
