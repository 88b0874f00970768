import math

import numpy as np
import pytest

from frechet_forest import spd
from frechet_forest.errors import InvalidPointError
from frechet_forest.sampling import RngStream


def _random_spd(q, n, seed):
    A = RngStream(seed).standard_normal((n, q, q))
    return A @ np.swapaxes(A, -1, -2) + q * np.eye(q)


data = []

# Closed-form distances
data += [(spd.ai_distance, np.eye(2), np.diag([math.e, math.e]), math.sqrt(2.))]
data += [(spd.le_distance, np.eye(2), np.diag([math.e ** 2, math.e ** -2]), math.sqrt(8.))]
data += [(spd.lc_distance, np.eye(2), np.diag([math.e ** 2, 1.]), 1.)]
data += [(spd.ai_distance, np.diag([2., 3.]), np.diag([2., 3.]), 0.)]


@pytest.mark.parametrize("fxn, S1, S2, answer", data)
def test_distances(fxn, S1, S2, answer):
    """
    Test the SPD distances on matrices with known distances

    :param callable fxn: The distance function
    :param np.ndarray S1: The first matrix
    :param np.ndarray S2: The second matrix
    :param float answer: The expected distance
    """

    assert np.isclose(fxn(S1, S2), answer, rtol=0., atol=1e-12)
    assert np.isclose(fxn(S2, S1), answer, rtol=0., atol=1e-12)


data = []

data += [(2, 1)]
data += [(3, 2)]
data += [(5, 3)]


@pytest.mark.parametrize("q, seed", data)
def test_matrix_functions(q, seed):
    """
    Test that the eigenvalue-based matrix functions invert each other

    :param int q: The matrix size
    :param int seed: The random seed
    """

    S = _random_spd(q, 20, seed)

    assert np.allclose(spd.expm(spd.logm(S)), S, atol=1e-10)
    assert np.allclose(spd.sqrtm(S) @ spd.sqrtm(S), S, atol=1e-10)
    assert np.allclose(spd.invsqrtm(S) @ S @ spd.invsqrtm(S), np.eye(q), atol=1e-10)
    assert np.allclose(spd.powm(S, -1.), np.linalg.inv(S), atol=1e-10)
    assert np.allclose(spd.log_cholesky_inverse(spd.log_cholesky(S), q), S, atol=1e-10)


@pytest.mark.parametrize("q, seed", data)
def test_affine_invariant_maps(q, seed):
    """
    Test the affine-invariant exponential and log maps and the tangent norm

    :param int q: The matrix size
    :param int seed: The random seed
    """

    S, T = _random_spd(q, 2, seed)

    V = spd.ai_log(S, T)

    assert np.allclose(V, V.T, atol=1e-10)
    assert np.allclose(spd.ai_exp(S, V), T, atol=1e-8)
    assert np.isclose(spd.ai_norm(S, V), spd.ai_distance(S, T), atol=1e-10)


def test_log_cholesky_isometry():
    """
    Test that the log-Cholesky distance is the Euclidean distance of the embeddings
    """

    S, T = _random_spd(3, 50, 1), _random_spd(3, 50, 2)

    embedded = np.linalg.norm(spd.log_cholesky(S) - spd.log_cholesky(T), axis=-1)

    assert spd.log_cholesky(S).shape == (50, 6)
    assert np.allclose(spd.lc_distance(S, T), embedded, rtol=0., atol=1e-12)


data = []

data += [(np.array([np.eye(2), np.diag([1., -1.])]), 1)]
data += [(np.array([np.diag([1., 0.]), np.eye(2)]), 0)]
data += [(np.array([np.eye(2), np.eye(2), np.diag([1., 1e-14])]), 2)]


@pytest.mark.parametrize("S, index", data)
def test_invalid_matrices(S, index):
    """
    Test that nonpositive eigenvalues are reported with the index of the offending matrix

    :param np.ndarray S: The stack of matrices
    :param int index: The index of the first invalid matrix
    """

    with pytest.raises(InvalidPointError) as err:
        spd.logm(S)

    assert err.value.index == index


def test_cholesky_failure():
    """
    Test that a failed Cholesky factorization names the offending matrix
    """

    S = np.array([np.eye(2), np.eye(2), -np.eye(2)])

    with pytest.raises(InvalidPointError) as err:
        spd.log_cholesky(S)

    assert err.value.index == 2
