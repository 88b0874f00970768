"""Batched matrix functions on symmetric positive definite matrices

All functions accept a single ``(q, q)`` matrix or a stack of shape ``(..., q, q)``. Matrix functions are computed
through the symmetric eigendecomposition; eigenvalues at or below ``EIGENVALUE_RATIO`` times the largest eigenvalue
are reported as invalid points rather than clamped.
"""

import numpy as np

from .errors import InvalidPointError

EIGENVALUE_RATIO = 1e-12


def _first_bad(mask):
    """Return the flat index of the first True entry of a (possibly scalar) mask"""
    flat = np.flatnonzero(np.reshape(mask, -1))
    return int(flat[0]) if flat.size else None


def checked_eigh(S):
    """Eigendecomposition of a stack of SPD matrices

    :param np.ndarray S: The matrices, shape ``(..., q, q)``

    :returns: eigenvalues ``(..., q)`` in ascending order and eigenvectors ``(..., q, q)``
    """
    w, V = np.linalg.eigh(np.asarray(S, dtype=float))
    top = w[..., -1]
    bad = (top <= 0) | np.any(w <= EIGENVALUE_RATIO * top[..., None], axis=-1)
    if np.any(bad):
        index = _first_bad(bad)
        eigenvalues = w.reshape(-1, w.shape[-1])[index]
        raise InvalidPointError(f"matrix {index} is not positive definite (eigenvalues {eigenvalues})", index=index)
    return w, V


def sym_apply(S, fxn, check=True):
    """Apply a scalar function to the eigenvalues of symmetric matrices

    :param np.ndarray S: The symmetric matrices, shape ``(..., q, q)``
    :param callable fxn: Vectorized function applied to the eigenvalues
    :param bool check: Require positive definiteness (False for tangent vectors)
    """
    if check:
        w, V = checked_eigh(S)
    else:
        w, V = np.linalg.eigh(np.asarray(S, dtype=float))
    return (V * fxn(w)[..., None, :]) @ np.swapaxes(V, -1, -2)


def logm(S):
    return sym_apply(S, np.log)


def expm(V):
    return sym_apply(V, np.exp, check=False)


def sqrtm(S):
    return sym_apply(S, np.sqrt)


def invsqrtm(S):
    return sym_apply(S, lambda w: 1. / np.sqrt(w))


def powm(S, power):
    return sym_apply(S, lambda w: w ** power)


def symmetrize(S):
    return 0.5 * (S + np.swapaxes(S, -1, -2))


def cholesky(S):
    """Lower Cholesky factors, reporting failures as invalid points"""
    S = np.asarray(S, dtype=float)
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        if S.ndim == 2:
            raise InvalidPointError("Cholesky factorization failed; matrix is not positive definite", index=0)
        for index, matrix in enumerate(S.reshape(-1, *S.shape[-2:])):
            try:
                np.linalg.cholesky(matrix)
            except np.linalg.LinAlgError:
                raise InvalidPointError(f"Cholesky factorization of matrix {index} failed", index=index)
        raise


def log_cholesky(S):
    """The log-Cholesky isometry into Euclidean space

    The image of ``S = R R^T`` stacks the logarithms of the diagonal of ``R`` followed by the strictly lower entries
    of ``R`` in row-major order, giving ``q(q+1)/2`` coordinates.
    """
    R = cholesky(S)
    q = R.shape[-1]
    rows, cols = np.tril_indices(q, -1)
    diag = np.log(np.diagonal(R, axis1=-2, axis2=-1))
    return np.concatenate([diag, R[..., rows, cols]], axis=-1)


def log_cholesky_inverse(v, q):
    """Inverse of :func:`log_cholesky`"""
    v = np.asarray(v, dtype=float)
    rows, cols = np.tril_indices(q, -1)
    R = np.zeros(v.shape[:-1] + (q, q))
    idx = np.arange(q)
    R[..., idx, idx] = np.exp(v[..., :q])
    R[..., rows, cols] = v[..., q:]
    return R @ np.swapaxes(R, -1, -2)


def ai_eigenvalues(S1, S2):
    """Eigenvalues of ``S1^{-1} S2`` computed from the congruent symmetric form ``L^{-1} S2 L^{-T}``"""
    L = cholesky(S1)
    X = np.linalg.solve(L, np.asarray(S2, dtype=float))
    M = np.linalg.solve(L, np.swapaxes(X, -1, -2))
    w = np.linalg.eigvalsh(symmetrize(M))
    if np.any(w <= 0):
        index = _first_bad(np.any(w <= 0, axis=-1))
        raise InvalidPointError(f"matrix {index} is not positive definite", index=index)
    return w


def ai_distance(S1, S2):
    return np.sqrt(np.sum(np.log(ai_eigenvalues(S1, S2)) ** 2, axis=-1))


def lc_distance(S1, S2):
    return np.linalg.norm(log_cholesky(S1) - log_cholesky(S2), axis=-1)


def le_distance(S1, S2):
    diff = logm(S1) - logm(S2)
    return np.sqrt(np.sum(diff ** 2, axis=(-2, -1)))


def ai_log(S, T):
    """Affine-invariant log map ``S^{1/2} log(S^{-1/2} T S^{-1/2}) S^{1/2}``"""
    w, V = checked_eigh(S)
    half = (V * np.sqrt(w)) @ V.T
    ihalf = (V / np.sqrt(w)) @ V.T
    return half @ logm(symmetrize(ihalf @ T @ ihalf)) @ half


def ai_exp(S, V):
    """Affine-invariant exponential map ``S^{1/2} exp(S^{-1/2} V S^{-1/2}) S^{1/2}``"""
    w, E = checked_eigh(S)
    half = (E * np.sqrt(w)) @ E.T
    ihalf = (E / np.sqrt(w)) @ E.T
    return symmetrize(half @ expm(symmetrize(ihalf @ V @ ihalf)) @ half)


def ai_norm(S, V):
    """Norm of tangent vectors ``V`` at ``S`` under the affine-invariant metric"""
    ihalf = invsqrtm(S)
    W = ihalf @ V @ ihalf
    return np.sqrt(np.sum(W ** 2, axis=(-2, -1)))
