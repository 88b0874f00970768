"""Random number streams and the von Mises-Fisher, hyperbolic von Mises-Fisher and Wishart samplers

Every sampler takes its randomness from an :class:`RngStream` (or a bare :class:`numpy.random.Generator`) and
returns stacked draws of shape ``(size, ...)``.
"""

import logging
import math

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, InvalidPointError
from .metric import minkowski

logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64


class RngStream(object):
    """A reproducible, splittable random stream

    The stream for ``(seed, key)`` is a PCG64 generator seeded by ``SeedSequence(seed, spawn_key=key)``. Streams with
    different keys are statistically independent, so work items keyed by their indices draw the same numbers
    regardless of scheduling.

    :param int seed: The 64-bit root seed
    :param tuple key: The stream identifier
    """

    algorithm = "PCG64"

    def __init__(self, seed, key=()):
        seed = int(seed)
        if not 0 <= seed < MAX_SEED:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.key = tuple(int(k) for k in key)
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.key)))

    def __repr__(self):
        return "RngStream(seed={0}, key={1})".format(self.seed, self.key)

    def __getattr__(self, name):
        if name.startswith("__") or name == "generator":
            raise AttributeError(name)
        return getattr(self.generator, name)

    def spawn(self, *key):
        """The child stream ``key`` of this stream"""
        return RngStream(self.seed, self.key + tuple(key))


def as_stream(rng):
    """Coerce a seed, a numpy generator or a stream into an :class:`RngStream`"""
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, np.random.Generator):
        return RngStream(int(rng.integers(MAX_SEED, dtype=np.uint64)))
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise ConfigurationError(f"cannot build a random stream from {rng!r}")


def _check_unit(mu):
    mu = np.asarray(mu, dtype=float)
    if abs(np.linalg.norm(mu) - 1.) > 1e-9:
        raise InvalidPointError(f"the location {mu} is not a unit vector", index=0)
    return mu


def _shape(size):
    return 1 if size is None else int(size)


def _squeeze(draws, size):
    return draws[0] if size is None else draws


def sample_uniform_sphere(dim, rng, size=None):
    """Uniform draws on the unit sphere of ``R^dim``"""
    x = rng.standard_normal((_shape(size), dim))
    return _squeeze(x / np.linalg.norm(x, axis=1, keepdims=True), size)


def _vmf_cosines(kappa, dim, n, rng):
    """Wood's rejection sampler for ``w = mu^T Y``"""
    p1 = dim - 1.
    b = p1 / (np.sqrt(4. * kappa ** 2 + p1 ** 2) + 2. * kappa)
    x0 = (1. - b) / (1. + b)
    log_one_minus_x0sq = math.log(4. * b) - 2. * math.log1p(b)
    c = kappa * x0 + p1 * log_one_minus_x0sq
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(n - filled, 16)
        z = rng.beta(p1 / 2., p1 / 2., size=m)
        w = (1. - (1. + b) * z) / (1. - (1. - b) * z)
        u = rng.random(m)
        accept = kappa * w + p1 * np.log1p(-x0 * w) - c >= np.log(u)
        w = w[accept][:n - filled]
        out[filled:filled + w.size] = w
        filled += w.size
    return out


def sample_vmf(mu, kappa, rng, size=None):
    """Draws from the von Mises-Fisher distribution with density proportional to ``exp(kappa mu^T y)``

    :param np.ndarray mu: The unit mean direction
    :param float kappa: The concentration, ``kappa >= 0``; zero gives the uniform distribution
    :param rng: An :class:`RngStream` or numpy generator
    :param int size: Number of draws; ``None`` returns a single point
    """
    mu = _check_unit(mu)
    if not kappa >= 0:
        raise ConfigurationError(f"vMF concentration must be nonnegative, got {kappa}")
    dim = mu.size
    n = _shape(size)
    if kappa == 0:
        return sample_uniform_sphere(dim, rng, size)
    w = _vmf_cosines(float(kappa), dim, n, rng)
    v = rng.standard_normal((n, dim))
    v -= np.outer(v @ mu, mu)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    y = w[:, None] * mu + np.sqrt(np.maximum(1. - w ** 2, 0.))[:, None] * v
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    return _squeeze(y, size)


def hvmf_envelope_rate(d, kappa):
    """Rate of the gamma envelope used for ``w = cosh(u) - 1`` on the ``d``-dimensional hyperboloid"""
    if d <= 2:
        return kappa
    return max(kappa - (d - 2) / 4., kappa / 2.)


def _hvmf_radial_excess(d, kappa, n, rng):
    """Draws of ``w = cosh(u) - 1`` with density proportional to ``(w(w+2))^((d-2)/2) exp(-kappa w)``"""
    rate = hvmf_envelope_rate(d, kappa)
    half = (d - 2) / 2.

    def log_ratio(w):
        return half * np.log(w + 2.) - (kappa - rate) * w

    if d > 2:
        w_star = max(half / (kappa - rate) - 2., 0.)
    else:
        w_star = 0.
    log_max = log_ratio(w_star)
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(n - filled, 16)
        w = rng.gamma(d / 2., 1. / rate, size=m)
        accept = np.log(rng.random(m)) <= log_ratio(w) - log_max
        w = w[accept][:n - filled]
        out[filled:filled + w.size] = w
        filled += w.size
    return out


def lorentz_boost(mu):
    """The hyperbolic rotation mapping the pole ``(1, 0, ..., 0)`` to ``mu``"""
    mu = np.asarray(mu, dtype=float)
    mu0, mur = mu[0], mu[1:]
    B = np.empty((mu.size, mu.size))
    B[0, 0] = mu0
    B[0, 1:] = mur
    B[1:, 0] = mur
    B[1:, 1:] = np.eye(mur.size) + np.outer(mur, mur) / (1. + mu0)
    return B


def sample_hvmf(mu, kappa, rng, size=None):
    """Draws from the hyperbolic von Mises-Fisher distribution with density proportional to ``exp(kappa (y, mu))``

    A draw at the pole is ``(cosh u, sinh u s)`` with ``s`` uniform on the unit sphere and the radial coordinate
    ``u`` distributed proportionally to ``sinh^(d-1)(u) exp(-kappa cosh u)``; it is carried to ``mu`` by
    :func:`lorentz_boost`.

    :param np.ndarray mu: The location on the hyperboloid in ``R^(d+1)``
    :param float kappa: The concentration, ``kappa > 0``
    :param rng: An :class:`RngStream` or numpy generator
    :param int size: Number of draws; ``None`` returns a single point
    """
    mu = np.asarray(mu, dtype=float)
    if abs(minkowski(mu, mu) + 1.) > 1e-9 * max(1., mu[0] ** 2) or mu[0] <= 0:
        raise InvalidPointError(f"the location {mu} is not on the hyperboloid", index=0)
    if not kappa > 0:
        raise ConfigurationError(f"HvMF concentration must be positive, got {kappa}")
    d = mu.size - 1
    n = _shape(size)
    w = _hvmf_radial_excess(d, float(kappa), n, rng)
    s = sample_uniform_sphere(d, rng, n) if d > 1 else rng.choice([-1., 1.], size=(n, 1))
    pole = np.hstack([(1. + w)[:, None], np.sqrt(w * (w + 2.))[:, None] * s])
    y = pole @ lorentz_boost(mu).T
    y[:, 0] = np.sqrt(1. + np.sum(y[:, 1:] ** 2, axis=1))
    return _squeeze(y, size)


def _sphere_log_area(d):
    """Log surface area of the unit sphere in ``R^d``"""
    return math.log(2.) + (d / 2.) * math.log(math.pi) - special.gammaln(d / 2.)


def hvmf_log_normalizer(d, kappa):
    """Log of the HvMF normalizing constant ``kappa^((d-1)/2) / ((2 pi)^((d-1)/2) 2 K_((d-1)/2)(kappa))``"""
    nu = (d - 1) / 2.
    log_bessel = math.log(special.kve(nu, kappa)) - kappa
    return nu * math.log(kappa) - nu * math.log(2. * math.pi) - math.log(2.) - log_bessel


def hvmf_log_normalizer_quadrature(d, kappa):
    """Log normalizing constant by quadrature of ``int sinh^(d-1)(u) exp(-kappa cosh u) du`` times the sphere area"""
    upper = math.acosh(1. + 800. / kappa)
    value, _ = integrate.quad(lambda u: math.exp(-kappa * (math.cosh(u) - 1.)) * math.sinh(u) ** (d - 1), 0., upper,
                              epsabs=0., epsrel=1e-13, limit=500)
    return -(_sphere_log_area(d) + math.log(value) - kappa)


def sample_wishart(d, sigma, rng, size=None):
    """Bartlett draws from ``Wishart_q(d, sigma)``

    :param float d: Degrees of freedom, ``d >= q``
    :param np.ndarray sigma: The SPD scale matrix
    :param rng: An :class:`RngStream` or numpy generator
    :param int size: Number of draws; ``None`` returns a single matrix
    """
    sigma = np.asarray(sigma, dtype=float)
    q = sigma.shape[0]
    if not d >= q:
        raise ConfigurationError(f"Wishart degrees of freedom must be at least {q}, got {d}")
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise InvalidPointError("the Wishart scale matrix is not positive definite", index=0)
    n = _shape(size)
    A = np.zeros((n, q, q))
    idx = np.arange(q)
    A[:, idx, idx] = np.sqrt(rng.chisquare(d - idx, size=(n, q)))
    rows, cols = np.tril_indices(q, -1)
    A[:, rows, cols] = rng.standard_normal((n, rows.size))
    LA = L @ A
    S = LA @ np.swapaxes(LA, -1, -2)
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    return _squeeze(S, size)


def wishart_ai_constant(d, q):
    """The constant ``c_{d,q} = 2 exp((1/q) sum_i digamma((d - i + 1)/2))`` making ``c Sigma`` the AI mean"""
    i = np.arange(1, q + 1)
    return float(2. * np.exp(np.mean(special.digamma((d - i + 1) / 2.))))


def _lc_factors(d, q):
    i = np.arange(1, q + 1)
    diagonal = np.sqrt(2.) * np.exp(0.5 * special.digamma((d - i + 1) / 2.))
    column = np.sqrt(2.) * np.exp(special.gammaln((d - i + 2) / 2.) - special.gammaln((d - i + 1) / 2.))
    return diagonal, column


def wishart_lc_mean(d, sigma):
    """Log-Cholesky Fréchet mean ``T T^T`` of ``Wishart_q(d, sigma)``

    With ``sigma = L L^T``, ``T_ii = L_ii sqrt(2) exp(digamma((d-i+1)/2)/2)`` and, below the diagonal,
    ``T_ij = L_ij E[chi_(d-j+1)]``.
    """
    L = np.linalg.cholesky(np.asarray(sigma, dtype=float))
    diagonal, column = _lc_factors(d, L.shape[0])
    T = np.tril(L, -1) * column[None, :] + np.diag(np.diag(L) * diagonal)
    return T @ T.T


def wishart_lc_scale(d, mean):
    """Scale matrix ``sigma`` whose Wishart law has log-Cholesky Fréchet mean ``mean``"""
    T = np.linalg.cholesky(np.asarray(mean, dtype=float))
    diagonal, column = _lc_factors(d, T.shape[0])
    L = np.tril(T, -1) / column[None, :] + np.diag(np.diag(T) / diagonal)
    return L @ L.T


def __getattr__(name):
    # scenarios imports this module, so the scenario generator is resolved lazily
    if name == "generate_scenario":
        from .scenarios import generate_scenario
        return generate_scenario
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
