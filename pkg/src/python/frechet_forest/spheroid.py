"""Geodesics on spheroids of revolution and the anisotropic distance they induce on the unit sphere

A point ``x`` of the unit sphere is sent to the spheroid with equatorial semi-axis ``a`` and polar semi-axis ``c`` by
``phi(x) = (a x1, a x2, c x3)``. In this parametrization the latitude of ``x`` is the reduced (parametric) latitude of
``phi(x)``, so the inverse geodesic problem can be posed on the auxiliary sphere as in Vincenty's method.

The inverse problem is solved by root finding on the auxiliary-sphere longitude ``omega``:

    g(omega) = omega - f sin(alpha0) I3(sigma1, sigma2) - lambda12 = 0,   omega in [0, pi]

with ``g(0) <= 0 <= g(pi)``. The distance integral ``c * int sqrt(1 + k^2 sin^2 sigma)`` and ``I3`` are evaluated with
composite Gauss-Legendre quadrature. Every root is refined and the shortest resulting arc is kept. Pairs for which
no root converges (discontinuities of ``g`` at antipodal configurations) are handed to a direct minimization of the
length of a discretized path.
"""

import logging
import math

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, GeodesicError, InvalidPointError

logger = logging.getLogger(__name__)

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
SCAN_POINTS = 17
MAX_ROOT_ITERATIONS = 64
ROOT_TOLERANCE = 1e-13
DISCONTINUITY_TOLERANCE = 1e-8
CHUNK_SIZE = 256
FALLBACK_SEGMENTS = (48, 96)


def _check_axes(a, c):
    if not (a > 0 and c > 0):
        raise ConfigurationError(f"spheroid semi-axes must be positive, got a={a}, c={c}")


def spheroid_map(x, a, c):
    """Map unit-sphere points onto the spheroid ``(x/a)^2 + (y/a)^2 + (z/c)^2 = 1``

    :param np.ndarray x: Unit vectors, shape ``(3,)`` or ``(n, 3)``
    :param float a: The equatorial semi-axis
    :param float c: The polar semi-axis
    """
    _check_axes(a, c)
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=-1)
    if np.any(np.abs(norms - 1.) > 1e-9):
        index = int(np.flatnonzero(np.reshape(np.abs(norms - 1.) > 1e-9, -1))[0])
        raise InvalidPointError(f"point {index} is not a unit vector (norm {np.reshape(norms, -1)[index]})",
                                index=index)
    return x * np.array([a, a, c])


def spheroid_unmap(p, a, c):
    """Inverse of :func:`spheroid_map`"""
    _check_axes(a, c)
    return np.asarray(p, dtype=float) / np.array([a, a, c])


def distance_bounds(theta, a, c):
    """Bounds ``min(a,c) theta <= d <= max(a,c) theta`` of the induced distance in terms of the sphere angle"""
    return min(a, c) * theta, max(a, c) * theta


def _reduced_coordinates(x):
    beta = np.arctan2(x[..., 2], np.hypot(x[..., 0], x[..., 1]))
    lam = np.arctan2(x[..., 1], x[..., 0])
    return beta, lam


class _Geometry(object):
    """Constants of one spheroid shared by the quadrature and the root finder"""

    def __init__(self, a, c):
        _check_axes(a, c)
        self.a = float(a)
        self.c = float(c)
        self.f = (self.a - self.c) / self.a
        self.ep2 = (self.a ** 2 - self.c ** 2) / self.c ** 2
        if self.ep2 > 0:
            delta = math.asinh(1. / math.sqrt(self.ep2))
        elif self.ep2 < 0:
            delta = math.acosh(1. / math.sqrt(-self.ep2))
        else:
            delta = math.inf
        self.panels = max(1, int(math.ceil(math.pi / (1.65 * delta))))

    def integrals(self, k2, sigma1, sigma2):
        """Return ``(I1, I3)`` over ``[sigma1, sigma2]`` for broadcastable arrays"""
        k2, sigma1, sigma2 = np.broadcast_arrays(k2, sigma1, sigma2)
        h = (sigma2 - sigma1) / self.panels
        offsets = np.arange(self.panels)[:, None] + 0.5 * (GL_NODES[None, :] + 1.)
        nodes = sigma1[..., None, None] + h[..., None, None] * offsets
        root = np.sqrt(1. + k2[..., None, None] * np.sin(nodes) ** 2)
        w = GL_WEIGHTS * 0.5
        i1 = h * np.sum(root * w, axis=(-2, -1))
        i3 = h * np.sum((2. - self.f) / (1. + (1. - self.f) * root) * w, axis=(-2, -1))
        return i1, i3

    def auxiliary(self, beta1, beta2, omega):
        """Solve the auxiliary-sphere triangle for a trial longitude ``omega``"""
        sb1, cb1 = np.sin(beta1), np.cos(beta1)
        sb2, cb2 = np.sin(beta2), np.cos(beta2)
        so, co = np.sin(omega), np.cos(omega)
        east = cb2 * so
        north = cb1 * sb2 - sb1 * cb2 * co
        sin_sigma = np.hypot(east, north)
        cos_sigma = sb1 * sb2 + cb1 * cb2 * co
        sigma = np.arctan2(sin_sigma, cos_sigma)
        alpha1 = np.arctan2(east, north)
        sin_alpha0 = np.sin(alpha1) * cb1
        k2 = self.ep2 * (1. - sin_alpha0 ** 2)
        sigma1 = np.arctan2(sb1, np.cos(alpha1) * cb1)
        return sigma, sin_alpha0, k2, sigma1

    def residual(self, beta1, beta2, lam12, omega):
        sigma, sin_alpha0, k2, sigma1 = self.auxiliary(beta1, beta2, omega)
        _, i3 = self.integrals(k2, sigma1, sigma1 + sigma)
        return omega - self.f * sin_alpha0 * i3 - lam12

    def arc_length(self, beta1, beta2, omega):
        sigma, _, k2, sigma1 = self.auxiliary(beta1, beta2, omega)
        i1, _ = self.integrals(k2, sigma1, sigma1 + sigma)
        return self.c * i1


def _illinois(geometry, beta1, beta2, lam12, lo, hi, glo, ghi):
    """Vectorized Illinois (modified regula falsi) refinement of bracketed roots"""
    lo, hi, glo, ghi = lo.copy(), hi.copy(), glo.copy(), ghi.copy()
    root = np.where(glo == 0., lo, hi)
    groot = np.where(glo == 0., glo, ghi)
    active = (glo != 0.) & (ghi != 0.)
    for _ in range(MAX_ROOT_ITERATIONS):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        denom = ghi[idx] - glo[idx]
        x = np.where(denom != 0., hi[idx] - ghi[idx] * (hi[idx] - lo[idx]) / np.where(denom != 0., denom, 1.),
                     0.5 * (lo[idx] + hi[idx]))
        gx = geometry.residual(beta1[idx], beta2[idx], lam12[idx], x)
        flip = np.sign(gx) != np.sign(ghi[idx])
        # the retained endpoint is halved when the same side is kept twice
        new_lo = np.where(flip, hi[idx], lo[idx])
        new_glo = np.where(flip, ghi[idx], 0.5 * glo[idx])
        lo[idx], glo[idx] = new_lo, new_glo
        hi[idx], ghi[idx] = x, gx
        root[idx], groot[idx] = x, gx
        done = (np.abs(gx) <= ROOT_TOLERANCE) | (np.abs(hi[idx] - lo[idx]) <= 1e-15)
        active[idx[done]] = False
    return root, groot


def _solve_chunk(geometry, beta1, beta2, lam12):
    """Shortest geodesic lengths for one chunk of reduced-coordinate pairs

    :returns: lengths and a mask of pairs whose roots all failed to converge
    """
    n = beta1.shape[0]
    grid = np.linspace(0., np.pi, SCAN_POINTS)
    omega = np.broadcast_to(grid[:, None], (SCAN_POINTS, n))
    g = geometry.residual(beta1[None, :], beta2[None, :], lam12[None, :], omega)

    k_idx, pair_idx = np.nonzero(g[:-1] * g[1:] <= 0.)
    lengths = np.full(n, np.inf)
    if pair_idx.size:
        roots, groots = _illinois(geometry, beta1[pair_idx], beta2[pair_idx], lam12[pair_idx],
                                  grid[k_idx], grid[k_idx + 1], g[k_idx, pair_idx], g[k_idx + 1, pair_idx])
        good = np.abs(groots) <= DISCONTINUITY_TOLERANCE
        if np.any(good):
            s = geometry.arc_length(beta1[pair_idx[good]], beta2[pair_idx[good]], roots[good])
            np.minimum.at(lengths, pair_idx[good], s)
    return lengths, ~np.isfinite(lengths)


def _sphere_points(p, a, c):
    p = np.asarray(p, dtype=float)
    residual = (p[..., 0] / a) ** 2 + (p[..., 1] / a) ** 2 + (p[..., 2] / c) ** 2 - 1.
    if np.any(np.abs(residual) > 1e-8):
        index = int(np.flatnonzero(np.reshape(np.abs(residual) > 1e-8, -1))[0])
        raise InvalidPointError(f"point {index} is not on the spheroid a={a}, c={c}", index=index)
    x = spheroid_unmap(p, a, c)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _induced(x, y, a, c):
    """Induced distances between broadcastable stacks of unit vectors"""
    x, y = np.broadcast_arrays(np.atleast_2d(x), np.atleast_2d(y))
    if a == c:
        return a * 2. * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))
    out = np.zeros(x.shape[0])
    distinct = np.flatnonzero(np.any(x != y, axis=-1))
    x, y = x[distinct], y[distinct]
    geometry = _Geometry(a, c)
    beta1, lam1 = _reduced_coordinates(x)
    beta2, lam2 = _reduced_coordinates(y)
    lam12 = np.abs(np.remainder(lam2 - lam1 + np.pi, 2. * np.pi) - np.pi)
    for start in range(0, x.shape[0], CHUNK_SIZE):
        sl = slice(start, start + CHUNK_SIZE)
        lengths, failed = _solve_chunk(geometry, beta1[sl], beta2[sl], lam12[sl])
        for offset in np.flatnonzero(failed):
            i = start + offset
            logger.debug("spheroid root finder did not converge for pair %d; using path minimization", distinct[i])
            lengths[offset] = geodesic_path_length(x[i], y[i], a, c)
        out[distinct[sl]] = lengths
    return out


def geodesic_path_length(x, y, a, c, segments=FALLBACK_SEGMENTS):
    """Length of the shortest spheroid path between ``phi(x)`` and ``phi(y)`` by direct minimization

    The interior vertices of a polygonal path are parametrized by unnormalized vectors ``u`` mapped to
    ``phi(u/|u|)``; the polygon length is minimized with L-BFGS-B for a coarse and a fine discretization and the two
    lengths are Richardson-extrapolated, since the chord error decays as ``N^-2``.

    :param np.ndarray x: First unit vector
    :param np.ndarray y: Second unit vector
    :param float a: The equatorial semi-axis
    :param float c: The polar semi-axis
    :param tuple segments: Coarse and fine segment counts
    """
    _check_axes(a, c)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scale = np.array([a, a, c])
    if np.allclose(x, y, rtol=0., atol=1e-15):
        return 0.

    def length_and_gradient(u_flat):
        U = u_flat.reshape(-1, 3)
        norms = np.linalg.norm(U, axis=1, keepdims=True)
        X = U / norms
        P = np.vstack([x * scale, X * scale, y * scale])
        seg = np.diff(P, axis=0)
        lengths = np.linalg.norm(seg, axis=1)
        unit = seg / np.maximum(lengths, 1e-300)[:, None]
        dX = (unit[:-1] - unit[1:]) * scale
        grad = (dX - np.sum(dX * X, axis=1, keepdims=True) * X) / norms
        return lengths.sum(), grad.ravel()

    def minimize(initial):
        result = optimize.minimize(length_and_gradient, initial[1:-1].ravel(), jac=True, method="L-BFGS-B",
                                   options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-12})
        interior = result.x.reshape(-1, 3)
        interior = interior / np.linalg.norm(interior, axis=1, keepdims=True)
        return result.fun, np.vstack([x, interior, y])

    coarse, fine = segments
    best_length, best_path = np.inf, None
    for initial in _initial_paths(x, y, coarse):
        length, path = minimize(initial)
        if length < best_length:
            best_length, best_path = length, path
    if best_path is None or not np.isfinite(best_length):
        raise GeodesicError(f"path minimization failed between {x} and {y}")

    refined = np.empty((fine + 1, 3))
    t = np.linspace(0., coarse, fine + 1)
    lower = np.minimum(np.floor(t).astype(int), coarse - 1)
    frac = (t - lower)[:, None]
    refined[:] = (1. - frac) * best_path[lower] + frac * best_path[lower + 1]
    refined /= np.linalg.norm(refined, axis=1, keepdims=True)
    fine_length, _ = minimize(refined)
    if not np.isfinite(fine_length):
        raise GeodesicError(f"path minimization failed between {x} and {y}")
    return fine_length + (fine_length - best_length) / 3.


def _slerp(x, y, count):
    angle = 2. * np.arctan2(np.linalg.norm(x - y), np.linalg.norm(x + y))
    t = np.linspace(0., 1., count + 1)[:, None]
    if angle < 1e-12:
        return np.repeat(x[None, :], count + 1, axis=0)
    return (np.sin((1. - t) * angle) * x + np.sin(t * angle) * y) / np.sin(angle)


def _initial_paths(x, y, count):
    """Candidate initial polygons: the great circle and detours through the poles and the equator"""
    paths = []
    if np.linalg.norm(x + y) > 1e-6:
        paths.append(_slerp(x, y, count))
    half = count // 2
    equator = np.cross(x, np.array([0., 0., 1.]))
    if np.linalg.norm(equator) < 1e-9:
        equator = np.array([1., 0., 0.])
    equator /= np.linalg.norm(equator)
    for middle in (np.array([0., 0., 1.]), np.array([0., 0., -1.]), equator, -equator):
        if np.linalg.norm(middle + x) < 1e-6 or np.linalg.norm(middle + y) < 1e-6:
            continue
        paths.append(np.vstack([_slerp(x, middle, half)[:-1], _slerp(middle, y, count - half)]))
    return paths


def geodesic_distances(P, Q, a, c):
    """Batched spheroid geodesic distances between broadcastable stacks of spheroid points"""
    return _induced(_sphere_points(P, a, c), _sphere_points(Q, a, c), a, c)


def spheroid_geodesic_distance(p, q, a, c):
    """Geodesic distance between two points of the spheroid ``(x/a)^2 + (y/a)^2 + (z/c)^2 = 1``

    :param np.ndarray p: The first spheroid point
    :param np.ndarray q: The second spheroid point
    :param float a: The equatorial semi-axis
    :param float c: The polar semi-axis

    :returns: The length of the shortest geodesic
    """
    _check_axes(a, c)
    return float(geodesic_distances(p, q, a, c)[0])


def induced_sphere_distances(x, Y, a, c):
    """Induced anisotropic distances from ``x`` (or a stack) to a stack of unit vectors ``Y``"""
    _check_axes(a, c)
    return _induced(np.asarray(x, dtype=float), np.asarray(Y, dtype=float), a, c)


def induced_sphere_distance(x, y, a, c):
    """Distance ``d(phi(x), phi(y))`` measured on the spheroid between the images of two unit vectors"""
    spheroid_map(np.stack([np.asarray(x, float), np.asarray(y, float)]), a, c)
    return float(induced_sphere_distances(x, y, a, c)[0])
