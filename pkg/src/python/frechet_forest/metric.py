"""Metric spaces supported as predictor components and responses

Points of one space are handled as stacked numpy arrays of shape ``(n, *space.shape)``. A :class:`MetricPoint`
wraps a single point together with its :class:`SpaceDescriptor` for the public, descriptor-checked operations
:func:`distance`, :func:`log_map` and :func:`exp_map`.

Descriptors have a canonical textual form used in configuration decks, CSV metadata and model files::

    euclidean:5   sphere:3   hyperboloid:3   spd:2:ai   quantile:100   spheroid:0.5:1.0
    product[euclidean:1,sphere:2]
"""

import abc
import enum
import functools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import spd
from .errors import (ConfigurationError, DescriptorMismatchError, InvalidPointError, NonUniqueGeodesicError,
                     UnsupportedSpaceError)
from .spheroid import (induced_sphere_distance, induced_sphere_distances, spheroid_geodesic_distance,
                       spheroid_map, spheroid_unmap)

logger = logging.getLogger(__name__)

__all__ = ["SpaceKind", "SPDMetric", "SpaceDescriptor", "MetricPoint", "Space", "Euclidean", "Sphere",
           "Hyperboloid", "SPDSpace", "QuantileGrid", "SpheroidInduced", "ProductSpace", "space_for", "distance",
           "log_map", "exp_map", "spheroid_map", "spheroid_unmap", "spheroid_geodesic_distance",
           "induced_sphere_distance"]

UNIT_TOLERANCE = 1e-9
SYMMETRY_TOLERANCE = 1e-10
TANGENT_TOLERANCE = 1e-9


class SpaceKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    SPHERE = "sphere"
    HYPERBOLOID = "hyperboloid"
    SPD = "spd"
    QUANTILE = "quantile"
    SPHEROID = "spheroid"
    PRODUCT = "product"


class SPDMetric(enum.Enum):
    AI = "ai"
    LC = "lc"
    LE = "le"


@dataclass(frozen=True)
class SpaceDescriptor:
    """Identifies a metric space

    :param SpaceKind kind: The family of the space
    :param int dim: Euclidean dimension, ambient dimension of the sphere or hyperboloid, matrix size of SPD spaces,
        or grid size of quantile grids. Spheroid-induced spaces live in ambient dimension 3.
    :param SPDMetric metric: The SPD metric
    :param float a: Equatorial semi-axis of the spheroid
    :param float c: Polar semi-axis of the spheroid
    :param tuple components: Component descriptors of a product space
    """

    kind: SpaceKind
    dim: int = 0
    metric: SPDMetric = None
    a: float = None
    c: float = None
    components: tuple = field(default=())

    def __post_init__(self):
        if self.kind is SpaceKind.PRODUCT:
            if len(self.components) < 1:
                raise ConfigurationError("a product space needs at least one component")
            for component in self.components:
                if component.kind is SpaceKind.PRODUCT:
                    raise ConfigurationError("product spaces cannot be nested")
            return
        if self.kind is SpaceKind.SPHEROID:
            if self.a is None or self.c is None or not (self.a > 0 and self.c > 0):
                raise ConfigurationError(f"spheroid semi-axes must be positive, got a={self.a}, c={self.c}")
            object.__setattr__(self, "dim", 3)
            return
        minimum = 2 if self.kind in (SpaceKind.SPHERE, SpaceKind.HYPERBOLOID) else 1
        if int(self.dim) != self.dim or self.dim < minimum:
            raise ConfigurationError(f"{self.kind.value} dimension must be an integer >= {minimum}, got {self.dim}")
        if self.kind is SpaceKind.SPD and not isinstance(self.metric, SPDMetric):
            raise ConfigurationError("spd spaces need a metric (ai, lc or le)")

    @classmethod
    def parse(cls, text):
        """Parse the canonical textual form

        :param str text: The descriptor text, e.g. ``spd:2:ai``
        """
        text = "".join(str(text).split())
        if text.startswith("product[") and text.endswith("]"):
            inner = text[len("product["):-1]
            if "[" in inner:
                raise ConfigurationError(f"product spaces cannot be nested: '{text}'")
            return cls(SpaceKind.PRODUCT, components=tuple(cls.parse(part) for part in inner.split(",") if part))
        parts = text.split(":")
        try:
            kind = SpaceKind(parts[0].lower())
        except ValueError:
            raise ConfigurationError(f"unknown space '{parts[0]}' in descriptor '{text}'")
        try:
            if kind is SpaceKind.SPD:
                if len(parts) != 3:
                    raise ConfigurationError(f"expected spd:<size>:<ai|lc|le>, got '{text}'")
                try:
                    metric = SPDMetric(parts[2].lower())
                except ValueError:
                    raise ConfigurationError(f"unknown SPD metric '{parts[2]}' in descriptor '{text}'")
                return cls(kind, dim=int(parts[1]), metric=metric)
            if kind is SpaceKind.SPHEROID:
                if len(parts) != 3:
                    raise ConfigurationError(f"expected spheroid:<a>:<c>, got '{text}'")
                return cls(kind, a=float(parts[1]), c=float(parts[2]))
            if kind is SpaceKind.PRODUCT or len(parts) != 2:
                raise ConfigurationError(f"malformed descriptor '{text}'")
            return cls(kind, dim=int(parts[1]))
        except ValueError as err:
            if isinstance(err, ConfigurationError):
                raise
            raise ConfigurationError(f"malformed descriptor '{text}': {err}")

    def __str__(self):
        if self.kind is SpaceKind.PRODUCT:
            return "product[" + ",".join(str(component) for component in self.components) + "]"
        if self.kind is SpaceKind.SPD:
            return f"spd:{self.dim}:{self.metric.value}"
        if self.kind is SpaceKind.SPHEROID:
            return f"spheroid:{float(self.a)!r}:{float(self.c)!r}"
        return f"{self.kind.value}:{self.dim}"

    def as_product(self):
        """Wrap a single component descriptor into a one-component product"""
        if self.kind is SpaceKind.PRODUCT:
            return self
        return SpaceDescriptor(SpaceKind.PRODUCT, components=(self,))

    @property
    def shape(self):
        """Array shape of one point"""
        if self.kind is SpaceKind.PRODUCT:
            raise UnsupportedSpaceError("product points are stored as one block per component")
        if self.kind is SpaceKind.SPD:
            return (self.dim, self.dim)
        return (self.dim,)

    @property
    def size(self):
        """Length of the flat coordinate buffer of one point"""
        if self.kind is SpaceKind.PRODUCT:
            return sum(component.size for component in self.components)
        return int(np.prod(self.shape))

    @property
    def space(self):
        return space_for(self)


@dataclass(frozen=True)
class MetricPoint:
    """A single point tagged with its space

    :param SpaceDescriptor descriptor: The space of the point
    :param np.ndarray data: The flat coordinate buffer (SPD matrices in row-major order)
    """

    descriptor: SpaceDescriptor
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float).reshape(-1)
        if data.size != self.descriptor.size:
            raise InvalidPointError(f"expected {self.descriptor.size} coordinates for {self.descriptor}, "
                                    f"got {data.size}", index=0)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, descriptor, array, validate=True):
        point = cls(descriptor, np.asarray(array, dtype=float).reshape(-1))
        if validate:
            point.validate()
        return point

    @property
    def array(self):
        """The coordinates in the natural shape of the space"""
        return self.descriptor.space.unflatten(self.data[None, :])[0]

    def validate(self):
        self.descriptor.space.validate(self.descriptor.space.unflatten(self.data[None, :]))
        return self


class Space(abc.ABC):
    """A metric space acting on stacked point arrays

    Subclasses implement :meth:`validate` and :meth:`distances`. Spaces with a Riemannian structure also implement
    :meth:`log`, :meth:`exp` and :meth:`norm`; ``closed_form_mean`` returns the weighted Fréchet mean where one is
    available.
    """

    def __init__(self, descriptor):
        self.descriptor = descriptor

    def __repr__(self):
        return "{0}({1})".format(type(self).__name__, self.descriptor)

    @property
    def shape(self):
        return self.descriptor.shape

    def flatten(self, points):
        points = np.asarray(points, dtype=float)
        return points.reshape(points.shape[0], -1)

    def unflatten(self, flat):
        flat = np.asarray(flat, dtype=float)
        return flat.reshape((flat.shape[0],) + self.shape)

    def as_stack(self, points):
        """Promote a single point to a stack of one"""
        points = np.asarray(points, dtype=float)
        if points.shape == self.shape:
            return points[None, ...]
        return points

    @abc.abstractmethod
    def validate(self, points):
        """Raise :class:`InvalidPointError` naming the first point violating the invariants of the space"""

    @abc.abstractmethod
    def distances(self, x, Y):
        """Distances from a single point ``x`` to every point of the stack ``Y``"""

    def distance(self, x, y):
        return float(self.distances(x, self.as_stack(y))[0])

    def pairwise(self, X, Y=None):
        """Matrix of distances between two stacks"""
        symmetric = Y is None
        Y = X if symmetric else Y
        out = np.empty((len(X), len(Y)))
        for i in range(len(X)):
            out[i] = self.distances(X[i], Y)
        if symmetric:
            out = 0.5 * (out + out.T)
            np.fill_diagonal(out, 0.)
        return out

    def log(self, base, Y):
        raise UnsupportedSpaceError(f"the log map is not available on {self.descriptor}")

    def exp(self, base, V):
        raise UnsupportedSpaceError(f"the exponential map is not available on {self.descriptor}")

    def norm(self, base, V):
        raise UnsupportedSpaceError(f"tangent norms are not available on {self.descriptor}")

    def check_tangent(self, base, V):
        pass

    def random_tangent(self, base, rng):
        """A random tangent vector at ``base`` with unit norm"""
        raise UnsupportedSpaceError(f"tangent vectors are not available on {self.descriptor}")

    @property
    def has_exp_log(self):
        return type(self).log is not Space.log

    @property
    def has_means(self):
        """Whether weighted Fréchet means can be computed (in closed form or iteratively)"""
        return self.has_exp_log or type(self).closed_form_mean is not Space.closed_form_mean

    def closed_form_mean(self, points, weights):
        """Weighted Fréchet mean in closed form, or None when the space requires an iterative solve"""
        return None


def _first_index(mask):
    return int(np.flatnonzero(mask)[0])


class Euclidean(Space):

    def validate(self, points):
        points = self.as_stack(points)
        bad = ~np.all(np.isfinite(points.reshape(len(points), -1)), axis=1)
        if np.any(bad):
            index = _first_index(bad)
            raise InvalidPointError(f"point {index} has non-finite coordinates", index=index)

    def distances(self, x, Y):
        return np.linalg.norm(np.asarray(Y, dtype=float) - x, axis=-1)

    def pairwise(self, X, Y=None):
        return cdist(X, X if Y is None else Y)

    def log(self, base, Y):
        return np.asarray(Y, dtype=float) - base

    def exp(self, base, V):
        return base + np.asarray(V, dtype=float)

    def norm(self, base, V):
        return np.linalg.norm(V, axis=-1)

    def random_tangent(self, base, rng):
        v = rng.standard_normal(self.shape)
        return v / np.linalg.norm(v)

    def closed_form_mean(self, points, weights):
        return np.tensordot(weights / weights.sum(), points, axes=1)


class QuantileGrid(Euclidean):
    """Quantile functions on the midpoint grid ``u_i = (i - 1/2)/m`` with the discretized 2-Wasserstein distance"""

    def validate(self, points):
        super().validate(points)
        points = self.as_stack(points)
        bad = np.any(np.diff(points, axis=-1) < 0, axis=-1)
        if np.any(bad):
            index = _first_index(bad)
            raise InvalidPointError(f"quantile grid {index} is not nondecreasing", index=index)

    def distances(self, x, Y):
        return np.sqrt(np.mean((np.asarray(Y, dtype=float) - x) ** 2, axis=-1))

    def pairwise(self, X, Y=None):
        return cdist(X, X if Y is None else Y) / np.sqrt(self.descriptor.dim)

    def norm(self, base, V):
        return np.sqrt(np.mean(np.asarray(V) ** 2, axis=-1))

    def random_tangent(self, base, rng):
        v = rng.standard_normal(self.shape)
        return v / self.norm(base, v)


class Sphere(Space):
    """The unit sphere in R^dim with the great-circle distance"""

    def validate(self, points):
        points = self.as_stack(points)
        norms = np.linalg.norm(points, axis=-1)
        bad = ~(np.abs(norms - 1.) <= UNIT_TOLERANCE)
        if np.any(bad):
            index = _first_index(bad)
            raise InvalidPointError(f"point {index} is not a unit vector (norm {norms[index]!r})", index=index)

    def distances(self, x, Y):
        Y = np.asarray(Y, dtype=float)
        return 2. * np.arctan2(np.linalg.norm(Y - x, axis=-1), np.linalg.norm(Y + x, axis=-1))

    def log(self, base, Y):
        Y = np.asarray(Y, dtype=float)
        if np.any(np.linalg.norm(Y + base, axis=-1) <= 1e-12):
            raise NonUniqueGeodesicError("the log map of antipodal points is undefined")
        d = self.distances(base, Y)
        u = Y - (Y @ base)[..., None] * base
        nu = np.linalg.norm(u, axis=-1)
        scale = np.where(nu > 0, d / np.where(nu > 0, nu, 1.), 0.)
        return scale[..., None] * u

    def exp(self, base, V):
        V = np.asarray(V, dtype=float)
        theta = np.linalg.norm(V, axis=-1)[..., None]
        direction = np.where(theta > 0, V / np.where(theta > 0, theta, 1.), 0.)
        out = np.cos(theta) * base + np.sin(theta) * direction
        return out / np.linalg.norm(out, axis=-1, keepdims=True)

    def norm(self, base, V):
        return np.linalg.norm(V, axis=-1)

    def check_tangent(self, base, V):
        if abs(float(np.dot(V, base))) > TANGENT_TOLERANCE:
            raise InvalidPointError("the tangent vector is not orthogonal to the base point", index=0)

    def random_tangent(self, base, rng):
        v = rng.standard_normal(self.shape)
        v -= np.dot(v, base) * base
        return v / np.linalg.norm(v)


def minkowski(x, y):
    """Minkowski pseudo-inner product ``-x0 y0 + sum_k xk yk`` over the last axis"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sum(x[..., 1:] * y[..., 1:], axis=-1) - x[..., 0] * y[..., 0]


class Hyperboloid(Space):
    """The upper sheet of ``(x, x) = -1`` in Minkowski space with the hyperbolic distance"""

    def validate(self, points):
        points = self.as_stack(points)
        residual = np.abs(minkowski(points, points) + 1.)
        # rounding in (x, x) grows with x0^2 far from the pole
        bad = ~((residual <= UNIT_TOLERANCE * np.maximum(1., points[:, 0] ** 2)) & (points[:, 0] > 0))
        if np.any(bad):
            index = _first_index(bad)
            raise InvalidPointError(f"point {index} is not on the upper hyperboloid sheet", index=index)

    def distances(self, x, Y):
        diff = np.asarray(Y, dtype=float) - x
        return 2. * np.arcsinh(0.5 * np.sqrt(np.maximum(minkowski(diff, diff), 0.)))

    def log(self, base, Y):
        Y = np.asarray(Y, dtype=float)
        d = self.distances(base, Y)
        u = Y + minkowski(base, Y)[..., None] * base
        nu = np.sqrt(np.maximum(minkowski(u, u), 0.))
        scale = np.where(nu > 0, d / np.where(nu > 0, nu, 1.), 0.)
        return scale[..., None] * u

    def exp(self, base, V):
        V = np.asarray(V, dtype=float)
        theta = np.sqrt(np.maximum(minkowski(V, V), 0.))[..., None]
        direction = np.where(theta > 0, V / np.where(theta > 0, theta, 1.), 0.)
        out = np.cosh(theta) * base + np.sinh(theta) * direction
        out[..., 0] = np.sqrt(1. + np.sum(out[..., 1:] ** 2, axis=-1))
        return out

    def norm(self, base, V):
        return np.sqrt(np.maximum(minkowski(V, V), 0.))

    def check_tangent(self, base, V):
        if abs(float(minkowski(V, base))) > TANGENT_TOLERANCE:
            raise InvalidPointError("the tangent vector is not Minkowski-orthogonal to the base point", index=0)

    def random_tangent(self, base, rng):
        v = rng.standard_normal(self.shape)
        v += minkowski(v, base) * base
        return v / self.norm(base, v)


class SPDSpace(Space):
    """Symmetric positive definite matrices under the affine-invariant, log-Cholesky or log-Euclidean metric

    Tangent vectors are symmetric matrices for the AI and LE metrics. For the LC metric they are lower-triangular
    matrices holding the differences of the log-Cholesky coordinates (log-diagonal on the diagonal).
    """

    def __init__(self, descriptor):
        super().__init__(descriptor)
        self.metric = descriptor.metric
        self.q = descriptor.dim

    def validate(self, points):
        points = self.as_stack(points)
        scale = np.maximum(1., np.max(np.abs(points), axis=(-2, -1)))
        asym = np.max(np.abs(points - np.swapaxes(points, -1, -2)), axis=(-2, -1))
        bad = ~(asym <= SYMMETRY_TOLERANCE * scale)
        if np.any(bad):
            index = _first_index(bad)
            raise InvalidPointError(f"matrix {index} is not symmetric", index=index)
        spd.checked_eigh(points)

    def distances(self, x, Y):
        Y = np.asarray(Y, dtype=float)
        if self.metric is SPDMetric.AI:
            return spd.ai_distance(np.broadcast_to(x, Y.shape), Y)
        if self.metric is SPDMetric.LC:
            return np.linalg.norm(spd.log_cholesky(Y) - spd.log_cholesky(x), axis=-1)
        diff = spd.logm(Y) - spd.logm(x)
        return np.sqrt(np.sum(diff ** 2, axis=(-2, -1)))

    def pairwise(self, X, Y=None):
        if self.metric is SPDMetric.AI:
            return super().pairwise(X, Y)
        embed = self.embed
        return cdist(embed(X), embed(X if Y is None else Y))

    def embed(self, S):
        """Euclidean coordinates of the flat LC and LE geometries"""
        if self.metric is SPDMetric.LC:
            return spd.log_cholesky(S)
        if self.metric is SPDMetric.LE:
            L = spd.logm(S)
            rows, cols = np.triu_indices(self.q, 1)
            diag = np.diagonal(L, axis1=-2, axis2=-1)
            return np.concatenate([diag, np.sqrt(2.) * L[..., rows, cols]], axis=-1)
        raise UnsupportedSpaceError("the affine-invariant metric has no flat embedding")

    def _lc_matrix(self, v):
        rows, cols = np.tril_indices(self.q, -1)
        out = np.zeros(v.shape[:-1] + (self.q, self.q))
        idx = np.arange(self.q)
        out[..., idx, idx] = v[..., :self.q]
        out[..., rows, cols] = v[..., self.q:]
        return out

    def _lc_vector(self, V):
        rows, cols = np.tril_indices(self.q, -1)
        return np.concatenate([np.diagonal(V, axis1=-2, axis2=-1), V[..., rows, cols]], axis=-1)

    def log(self, base, Y):
        if self.metric is SPDMetric.AI:
            return spd.ai_log(base, np.asarray(Y, dtype=float))
        if self.metric is SPDMetric.LC:
            return self._lc_matrix(spd.log_cholesky(Y) - spd.log_cholesky(base))
        return spd.logm(Y) - spd.logm(base)

    def exp(self, base, V):
        V = np.asarray(V, dtype=float)
        if self.metric is SPDMetric.AI:
            return spd.ai_exp(base, V)
        if self.metric is SPDMetric.LC:
            return spd.log_cholesky_inverse(spd.log_cholesky(base) + self._lc_vector(V), self.q)
        return spd.expm(spd.logm(base) + V)

    def norm(self, base, V):
        if self.metric is SPDMetric.AI:
            return spd.ai_norm(base, V)
        return np.sqrt(np.sum(np.asarray(V) ** 2, axis=(-2, -1)))

    def check_tangent(self, base, V):
        V = np.asarray(V)
        if self.metric is SPDMetric.LC:
            if np.max(np.abs(np.triu(V, 1))) > TANGENT_TOLERANCE:
                raise InvalidPointError("log-Cholesky tangent vectors are lower triangular", index=0)
        elif np.max(np.abs(V - V.T)) > TANGENT_TOLERANCE:
            raise InvalidPointError("the tangent vector is not symmetric", index=0)

    def random_tangent(self, base, rng):
        V = rng.standard_normal(self.shape)
        V = np.tril(V) if self.metric is SPDMetric.LC else spd.symmetrize(V)
        return V / self.norm(base, V)

    def closed_form_mean(self, points, weights):
        w = weights / weights.sum()
        if self.metric is SPDMetric.LC:
            return spd.log_cholesky_inverse(np.tensordot(w, spd.log_cholesky(points), axes=1), self.q)
        if self.metric is SPDMetric.LE:
            return spd.symmetrize(spd.expm(np.tensordot(w, spd.logm(points), axes=1)))
        return None


class SpheroidInduced(Sphere):
    """Unit vectors of R^3 with the distance induced by the spheroid ``phi(x) = (a x1, a x2, c x3)``

    Only distances are available; Fréchet means are replaced by medoids on this space.
    """

    def __init__(self, descriptor):
        super().__init__(descriptor)
        self.a = float(descriptor.a)
        self.c = float(descriptor.c)

    def distances(self, x, Y):
        return induced_sphere_distances(x, np.asarray(Y, dtype=float), self.a, self.c)

    def pairwise(self, X, Y=None):
        symmetric = Y is None
        Y = X if symmetric else Y
        if symmetric:
            rows, cols = np.triu_indices(len(X), 1)
            out = np.zeros((len(X), len(X)))
            out[rows, cols] = induced_sphere_distances(X[rows], X[cols], self.a, self.c)
            return out + out.T
        rows, cols = np.indices((len(X), len(Y))).reshape(2, -1)
        return induced_sphere_distances(X[rows], Y[cols], self.a, self.c).reshape(len(X), len(Y))

    log = Space.log
    exp = Space.exp
    norm = Space.norm
    random_tangent = Space.random_tangent

    def check_tangent(self, base, V):
        raise UnsupportedSpaceError(f"tangent vectors are not available on {self.descriptor}")


class ProductSpace(object):
    """Product of metric spaces with the distance ``sqrt(sum_j d_j^2)``

    Points are lists of per-component stacks ("blocks").
    """

    def __init__(self, descriptor):
        self.descriptor = descriptor.as_product()
        self.spaces = [space_for(component) for component in self.descriptor.components]

    def __repr__(self):
        return "ProductSpace({0})".format(self.descriptor)

    def __len__(self):
        return len(self.spaces)

    def validate(self, blocks):
        if len(blocks) != len(self.spaces):
            raise DescriptorMismatchError(f"expected {len(self.spaces)} predictor blocks, got {len(blocks)}")
        for space, block in zip(self.spaces, blocks):
            space.validate(block)

    def flatten(self, blocks):
        return np.hstack([space.flatten(block) for space, block in zip(self.spaces, blocks)])

    def unflatten(self, flat):
        flat = np.asarray(flat, dtype=float)
        blocks, start = [], 0
        for space in self.spaces:
            size = space.descriptor.size
            blocks.append(space.unflatten(flat[:, start:start + size]))
            start += size
        return blocks

    def distances(self, x_blocks, Y_blocks):
        total = 0.
        for space, x, Y in zip(self.spaces, x_blocks, Y_blocks):
            total = total + space.distances(x, Y) ** 2
        return np.sqrt(total)


@functools.lru_cache(maxsize=None)
def space_for(descriptor):
    """The (cached) space object of a descriptor"""
    kinds = {SpaceKind.EUCLIDEAN: Euclidean, SpaceKind.SPHERE: Sphere, SpaceKind.HYPERBOLOID: Hyperboloid,
             SpaceKind.SPD: SPDSpace, SpaceKind.QUANTILE: QuantileGrid, SpaceKind.SPHEROID: SpheroidInduced,
             SpaceKind.PRODUCT: ProductSpace}
    return kinds[descriptor.kind](descriptor)


def _same_space(*points):
    first = points[0].descriptor
    for point in points[1:]:
        if point.descriptor != first:
            raise DescriptorMismatchError(f"points live on different spaces: {first} and {point.descriptor}")
    return first


def distance(a, b):
    """Distance between two points of the same space

    :param MetricPoint a: The first point
    :param MetricPoint b: The second point

    :returns: The nonnegative distance
    """
    descriptor = _same_space(a, b)
    space = descriptor.space
    if descriptor.kind is SpaceKind.PRODUCT:
        x, y = space.unflatten(a.data[None, :]), space.unflatten(b.data[None, :])
        space.validate(x)
        space.validate(y)
        return float(space.distances([block[0] for block in x], y)[0])
    x, y = a.array, b.array
    space.validate(x)
    space.validate(y)
    return space.distance(x, y)


def log_map(base, target):
    """Tangent vector at ``base`` pointing to ``target`` with norm equal to their distance

    :param MetricPoint base: The base point
    :param MetricPoint target: The target point

    :returns: The tangent vector as an array shaped like a point
    """
    descriptor = _same_space(base, target)
    space = descriptor.space
    x, y = base.array, target.array
    space.validate(x)
    space.validate(y)
    return space.log(x, y)


def exp_map(base, tangent):
    """Point reached from ``base`` along the geodesic with initial velocity ``tangent``

    :param MetricPoint base: The base point
    :param np.ndarray tangent: A tangent vector at ``base``

    :returns: The endpoint as a :class:`MetricPoint`
    """
    space = base.descriptor.space
    if base.descriptor.kind is SpaceKind.PRODUCT:
        raise UnsupportedSpaceError("exp_map is defined on single components only")
    x = base.array
    space.validate(x)
    tangent = np.asarray(tangent, dtype=float).reshape(space.shape)
    space.check_tangent(x, tangent)
    return MetricPoint(base.descriptor, space.exp(x, tangent).reshape(-1))
