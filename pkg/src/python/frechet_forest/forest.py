"""Random forests with metric-space responses

Three flavors share one tree-growing procedure and differ in how they aggregate:

* ``frf``: every leaf stores the Fréchet mean of its bootstrap responses and the forest prediction is the Fréchet
  mean of the tree predictions.
* ``rfwlcfr``: the forest induces adaptive nearest-neighbour weights on the training sample and the prediction is
  the weighted Fréchet mean of the training responses.
* ``mrf``: as ``rfwlcfr`` but every mean, in splitting and in aggregation, is replaced by a medoid.

Nodes are split by 2-means clustering of one predictor component. A query travels left when it is at least as close
to the left cluster center as to the right one.
"""

import enum
import itertools
import logging
import time
from dataclasses import dataclass, field, replace

import joblib
import numpy as np

from .errors import DescriptorMismatchError, FitError, NonUniqueGeodesicError, NoOobTreesError, NoSplitError, \
    UnsupportedSpaceError
from .frechet import WeightedSample, frechet_mean, frechet_medoid
from .sampling import as_stream

logger = logging.getLogger(__name__)

MAX_SEED_SUBSET = 32
MAX_LLOYD_ITERATIONS = 10
GAIN_TOLERANCE = 1e-12
MIN_SPLIT_GRID = (1, 5, 10)


class Flavor(enum.Enum):
    FRF = "frf"
    RFWLCFR = "rfwlcfr"
    MRF = "mrf"

    @property
    def uses_medoids(self):
        return self is Flavor.MRF


@dataclass(frozen=True)
class ForestHyperparameters:
    """Forest size and tree-growing controls

    :param int n_trees: Number of trees
    :param int mtry: Number of predictor components tried at every node; all of them when None
    :param int min_split_size: Minimum (bootstrap-weighted) size of a child node
    """

    n_trees: int = 200
    mtry: int = None
    min_split_size: int = 5

    def resolve(self, p):
        """Validated copy with ``mtry`` filled in for ``p`` predictor components"""
        mtry = p if self.mtry is None else int(self.mtry)
        if int(self.n_trees) < 1:
            raise FitError(f"the forest needs at least one tree, got {self.n_trees}")
        if not 1 <= mtry <= p:
            raise FitError(f"mtry must lie in [1, {p}], got {mtry}")
        if int(self.min_split_size) < 1:
            raise FitError(f"the minimum split size must be positive, got {self.min_split_size}")
        return ForestHyperparameters(int(self.n_trees), mtry, int(self.min_split_size))


@dataclass(frozen=True)
class SplitRule:
    """Voronoi split of one predictor component between two centers"""

    feature: int
    left_center: np.ndarray
    right_center: np.ndarray

    def goes_left(self, space, values):
        return space.distances(self.left_center, values) <= space.distances(self.right_center, values)


@dataclass(eq=False)
class TreeNode:
    """A node of a grown tree

    Internal nodes carry a split rule and two children. Leaves carry their unique in-bag training indices, the
    bootstrap multiplicities of those indices and, for ``frf`` forests, the leaf Fréchet mean.
    """

    members: np.ndarray
    counts: np.ndarray
    rule: SplitRule = None
    left: "TreeNode" = None
    right: "TreeNode" = None
    value: np.ndarray = None
    leaf_id: int = -1

    @property
    def is_leaf(self):
        return self.rule is None

    @property
    def weights(self):
        return self.counts / self.counts.sum()


@dataclass(eq=False)
class Tree:
    root: TreeNode
    leaves: list = field(default_factory=list)

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack += [node.right, node.left]

    @property
    def depth(self):
        def _depth(node):
            return 0 if node.is_leaf else 1 + max(_depth(node.left), _depth(node.right))
        return _depth(self.root)

    def apply(self, predictor_spaces, blocks):
        """Leaf id reached by every row of the predictor blocks"""
        m = len(blocks[0])
        out = np.full(m, -1, dtype=int)
        stack = [(self.root, np.arange(m))]
        while stack:
            node, rows = stack.pop()
            if rows.size == 0:
                continue
            if node.is_leaf:
                out[rows] = node.leaf_id
                continue
            j = node.rule.feature
            left = node.rule.goes_left(predictor_spaces[j], blocks[j][rows])
            stack += [(node.right, rows[~left]), (node.left, rows[left])]
        return out


@dataclass(frozen=True)
class ForestWeights:
    """Forest-induced weights of the training observations for one query

    :param np.ndarray weights: Shape ``(n,)``, nonnegative and summing to one
    :param np.ndarray trees: The trees averaged over
    """

    weights: np.ndarray
    trees: np.ndarray


@dataclass(eq=False)
class ForestModel:
    """A fitted forest together with the training sample it remembers

    :param Flavor flavor: The aggregation flavor
    :param ForestHyperparameters hyperparameters: Resolved hyperparameters
    :param Dataset training: The training sample
    :param list trees: The grown trees
    :param np.ndarray bootstrap_counts: Shape ``(n_trees, n)`` bootstrap multiplicities
    :param int seed: Root seed of the fit
    :param tuple key: Stream key of the fit
    """

    flavor: Flavor
    hyperparameters: ForestHyperparameters
    training: object
    trees: list
    bootstrap_counts: np.ndarray
    seed: int = None
    key: tuple = ()
    distance_matrix: np.ndarray = None
    training_leaves: np.ndarray = None

    def __post_init__(self):
        if self.flavor.uses_medoids and self.distance_matrix is None:
            self.distance_matrix = self.response_space.pairwise(self.training.responses)
        if self.training_leaves is None:
            self.training_leaves = np.array([tree.apply(self.predictor_spaces, self.training.predictors)
                                             for tree in self.trees], dtype=int).reshape(len(self.trees), self.n)

    @property
    def n(self):
        return self.training.n

    @property
    def n_trees(self):
        return len(self.trees)

    @property
    def predictor_descriptor(self):
        return self.training.predictor_descriptor

    @property
    def response_descriptor(self):
        return self.training.response_descriptor

    @property
    def predictor_spaces(self):
        return self.training.predictor_space.spaces

    @property
    def response_space(self):
        return self.training.response_space

    def oob_trees(self, i):
        """Indices of the trees whose bootstrap sample left observation ``i`` out"""
        return np.flatnonzero(self.bootstrap_counts[:, i] == 0)

    def in_bag(self, i):
        return np.flatnonzero(self.bootstrap_counts[:, i] > 0)


def _center(space, points, weights, use_medoids):
    sample = WeightedSample(space, points, weights)
    if use_medoids or not space.has_means:
        return frechet_medoid(sample).minimizer
    try:
        return frechet_mean(sample).minimizer
    except NonUniqueGeodesicError:
        return frechet_medoid(sample).minimizer


def _farthest_pair(space, values, rng):
    m = len(values)
    subset = np.arange(m)
    if m > MAX_SEED_SUBSET:
        subset = np.sort(rng.choice(m, size=MAX_SEED_SUBSET, replace=False))
    D = np.triu(space.pairwise(values[subset]))
    if D.max() > 0:
        i, j = np.unravel_index(int(np.argmax(D)), D.shape)
        return subset[i], subset[j]
    first = subset[0]
    return first, int(np.argmax(space.distances(values[first], values)))


def two_means_split(space, values, weights=None, rng=None, use_medoids=False,
                    max_iterations=MAX_LLOYD_ITERATIONS):
    """Two-cluster Lloyd iteration on one predictor component

    Seeds are the farthest pair among at most 32 randomly chosen points. Cluster centers are weighted Fréchet means,
    or medoids when ``use_medoids`` is set or the space has no means.

    :param Space space: The component space
    :param np.ndarray values: The node's component values
    :param np.ndarray weights: Bootstrap multiplicities of the values
    :param rng: Source of the seeding subset
    :param bool use_medoids: Use medoid centers
    :param int max_iterations: Lloyd iteration cap

    :returns: ``(left_center, right_center, left_mask)`` where ``left_mask`` is the Voronoi assignment to the returned
        centers
    """
    values = np.asarray(values, dtype=float)
    weights = np.ones(len(values)) if weights is None else np.asarray(weights, dtype=float)
    if len(values) < 2 or np.all(values == values[0]):
        raise NoSplitError("fewer than two distinct values")
    rng = as_stream(0 if rng is None else rng)

    i, j = _farthest_pair(space, values, rng)
    rule = SplitRule(-1, values[i].copy(), values[j].copy())
    labels = None
    for iteration in range(max_iterations):
        left = rule.goes_left(space, values)
        if labels is not None and np.array_equal(left, labels):
            break
        labels = left
        if iteration == max_iterations - 1 or left.all() or not left.any():
            break
        rule = SplitRule(-1, _center(space, values[left], weights[left], use_medoids),
                         _center(space, values[~left], weights[~left], use_medoids))
    left = rule.goes_left(space, values)
    if left.all() or not left.any() or space.distance(rule.left_center, rule.right_center) == 0:
        raise NoSplitError("the two clusters collapsed")
    return rule.left_center, rule.right_center, left


def node_variance(space, responses, weights=None, use_medoids=False, distance_matrix=None):
    """Weighted Fréchet variance of a node sample about its mean, or its medoid when ``use_medoids`` is set

    :param np.ndarray distance_matrix: Pairwise response distances within the node, used for medoids
    """
    responses = np.asarray(responses, dtype=float)
    weights = np.ones(len(responses)) if weights is None else np.asarray(weights, dtype=float)
    if len(responses) < 2 or np.all(responses == responses[0]):
        return 0.
    sample = WeightedSample(space, responses, weights)
    if use_medoids:
        return frechet_medoid(sample, distance_matrix=distance_matrix).objective
    return frechet_mean(sample).objective


def cart_gain(space, responses, weights, left, use_medoids=False, distance_matrix=None):
    """Reduction of the weighted Fréchet variance achieved by a two-way partition

    ``V(A) - |A_l| / |A| V(A_l) - |A_r| / |A| V(A_r)`` with sizes counted with bootstrap multiplicity.
    """
    left = np.asarray(left, dtype=bool)
    weights = np.ones(len(left)) if weights is None else np.asarray(weights, dtype=float)
    if left.all() or not left.any():
        raise NoSplitError("one side of the partition is empty")

    def variance(mask):
        D = None if distance_matrix is None else np.asarray(distance_matrix)[np.ix_(mask, mask)]
        return node_variance(space, responses[mask], weights[mask], use_medoids, D)

    total = weights.sum()
    everything = np.ones(len(left), dtype=bool)
    return (variance(everything) - weights[left].sum() / total * variance(left)
            - weights[~left].sum() / total * variance(~left))


class _TreeGrower(object):
    """Grows trees on one training sample"""

    def __init__(self, dataset, flavor, hyperparameters, distance_matrix=None):
        self.predictors = dataset.predictors
        self.predictor_spaces = dataset.predictor_space.spaces
        self.responses = dataset.responses
        self.response_space = dataset.response_space
        self.flavor = flavor
        self.mtry = hyperparameters.mtry
        self.min_split_size = hyperparameters.min_split_size
        self.distance_matrix = distance_matrix

    def variance(self, idx, counts):
        D = None
        if self.flavor.uses_medoids:
            D = self.distance_matrix[np.ix_(idx, idx)]
        return node_variance(self.response_space, self.responses[idx], counts, self.flavor.uses_medoids, D)

    def best_split(self, idx, counts, rng):
        total = counts.sum()
        if total < 2 * self.min_split_size:
            return None
        parent = self.variance(idx, counts)
        if parent <= 0:
            return None
        best = None
        for j in rng.choice(len(self.predictors), size=self.mtry, replace=False):
            space = self.predictor_spaces[j]
            try:
                left_center, right_center, left = two_means_split(space, self.predictors[j][idx], counts, rng,
                                                                  self.flavor.uses_medoids)
            except NoSplitError:
                continue
            n_left, n_right = counts[left].sum(), counts[~left].sum()
            if n_left < self.min_split_size or n_right < self.min_split_size:
                continue
            gain = (parent - n_left / total * self.variance(idx[left], counts[left])
                    - n_right / total * self.variance(idx[~left], counts[~left]))
            if gain > GAIN_TOLERANCE * parent and (best is None or gain > best[0]):
                best = (gain, SplitRule(int(j), left_center, right_center), left)
        return best

    def leaf(self, node, tree):
        node.leaf_id = len(tree.leaves)
        tree.leaves.append(node)
        if self.flavor is Flavor.FRF:
            node.value = frechet_mean(WeightedSample(self.response_space, self.responses[node.members],
                                                     node.counts)).minimizer

    def grow(self, bootstrap_counts, rng):
        members = np.flatnonzero(bootstrap_counts)
        tree = Tree(TreeNode(members, bootstrap_counts[members].astype(float)))
        stack = [tree.root]
        while stack:
            node = stack.pop()
            best = self.best_split(node.members, node.counts, rng)
            if best is None:
                self.leaf(node, tree)
                continue
            _, node.rule, left = best
            node.left = TreeNode(node.members[left], node.counts[left])
            node.right = TreeNode(node.members[~left], node.counts[~left])
            stack += [node.right, node.left]
        return tree


def grow_tree(dataset, bootstrap_counts, hyperparameters, rng, flavor=Flavor.RFWLCFR, distance_matrix=None):
    """Grow one tree on the bootstrap sample given by per-observation multiplicities

    :param Dataset dataset: The training sample
    :param np.ndarray bootstrap_counts: Shape ``(n,)`` multiplicities
    :param ForestHyperparameters hyperparameters: Tree-growing controls
    :param rng: Source of the feature draws and 2-means seeding
    :param Flavor flavor: Selects mean or medoid centers and leaf means
    :param np.ndarray distance_matrix: Pairwise training response distances, required for medoids
    """
    hyperparameters = hyperparameters.resolve(dataset.p)
    flavor = Flavor(flavor)
    if flavor.uses_medoids and distance_matrix is None:
        distance_matrix = dataset.response_space.pairwise(dataset.responses)
    bootstrap_counts = np.asarray(bootstrap_counts, dtype=int)
    if bootstrap_counts.shape != (dataset.n,) or bootstrap_counts.sum() == 0:
        raise FitError("the bootstrap sample is empty or does not match the dataset")
    return _TreeGrower(dataset, flavor, hyperparameters, distance_matrix).grow(bootstrap_counts, as_stream(rng))


def bootstrap_counts(n, rng):
    """Multiplicities of a size-``n`` bootstrap resample"""
    indices = rng.integers(0, n, n)
    return np.bincount(indices, minlength=n)


def _grow_one(grower, stream):
    counts = bootstrap_counts(len(grower.responses), stream)
    return counts, grower.grow(counts, stream)


def fit_forest(dataset, flavor=Flavor.RFWLCFR, hyperparameters=None, rng=0, n_jobs=1):
    """Fit a forest

    Tree ``b`` draws its bootstrap sample and all of its randomness from child stream ``b`` of ``rng``, so the fit
    does not depend on ``n_jobs``.

    :param Dataset dataset: The training sample
    :param Flavor flavor: The aggregation flavor
    :param ForestHyperparameters hyperparameters: Defaults to :class:`ForestHyperparameters` defaults
    :param rng: Seed, generator or :class:`RngStream`
    :param int n_jobs: Number of joblib workers

    :returns: A :class:`ForestModel`
    """
    flavor = Flavor(flavor)
    hyperparameters = (hyperparameters or ForestHyperparameters()).resolve(dataset.p)
    if dataset.n < 2:
        raise FitError(f"a forest needs at least two observations, got {dataset.n}")
    if not flavor.uses_medoids and not dataset.response_space.has_means:
        raise UnsupportedSpaceError(f"{flavor.value} needs Fréchet means, which {dataset.response_descriptor} "
                                    f"does not provide; use the mrf flavor")
    stream = as_stream(rng)
    start = time.perf_counter()
    distance_matrix = dataset.response_space.pairwise(dataset.responses) if flavor.uses_medoids else None
    grower = _TreeGrower(dataset, flavor, hyperparameters, distance_matrix)
    grown = joblib.Parallel(n_jobs=n_jobs)(joblib.delayed(_grow_one)(grower, stream.spawn(b))
                                           for b in range(hyperparameters.n_trees))
    counts = np.array([c for c, _ in grown], dtype=int)
    model = ForestModel(flavor, hyperparameters, dataset, [tree for _, tree in grown], counts, stream.seed,
                        stream.key, distance_matrix)
    logger.info("fitted %s forest with %d trees on %d observations in %.2f s", flavor.value,
                hyperparameters.n_trees, dataset.n, time.perf_counter() - start)
    return model


def _check_queries(model, blocks):
    if len(blocks) != len(model.predictor_spaces):
        raise DescriptorMismatchError(f"{len(blocks)} predictor blocks for {model.predictor_descriptor}")
    blocks = [np.asarray(block, dtype=float) for block in blocks]
    for block, space in zip(blocks, model.predictor_spaces):
        if block.shape[1:] != space.shape:
            raise DescriptorMismatchError(f"query block of shape {block.shape[1:]} for {space.descriptor}")
    return blocks


def forest_weight_matrix(model, blocks, restrict_to_trees=None):
    """Forest weights of every query row, shape ``(m, n)``"""
    blocks = _check_queries(model, blocks)
    trees = np.arange(model.n_trees) if restrict_to_trees is None else np.asarray(restrict_to_trees, dtype=int)
    if trees.size == 0:
        raise FitError("cannot average over an empty set of trees")
    W = np.zeros((len(blocks[0]), model.n))
    for b in trees:
        tree = model.trees[b]
        leaf_ids = tree.apply(model.predictor_spaces, blocks)
        for leaf_id in np.unique(leaf_ids):
            leaf = tree.leaves[leaf_id]
            W[np.ix_(leaf_ids == leaf_id, leaf.members)] += leaf.weights
    return W / trees.size


def forest_weights(model, x, restrict_to_trees=None):
    """Forest-induced weights of the training observations for the single query ``x`` (a list of blocks)

    :returns: A :class:`ForestWeights`
    """
    blocks = [np.asarray(block, dtype=float)[None, ...] for block in x]
    trees = np.arange(model.n_trees) if restrict_to_trees is None else np.asarray(restrict_to_trees, dtype=int)
    return ForestWeights(forest_weight_matrix(model, blocks, trees)[0], trees)


def _aggregate(model, weights, exclude=()):
    sample = WeightedSample(model.response_space, model.training.responses, weights)
    if model.flavor.uses_medoids:
        candidates = np.setdiff1d(np.arange(model.n), np.asarray(exclude, dtype=int))
        return frechet_medoid(sample, candidates, model.distance_matrix).minimizer
    return frechet_mean(sample).minimizer


def _aggregate_trees(model, values):
    return frechet_mean(WeightedSample(model.response_space, np.stack(values))).minimizer


def predict(model, blocks):
    """Forest predictions at stacked queries

    :param ForestModel model: The fitted forest
    :param list blocks: One stack per predictor component

    :returns: Predictions stacked along the first axis
    """
    blocks = _check_queries(model, blocks)
    m = len(blocks[0])
    if m == 0:
        return np.empty((0,) + model.response_space.shape)
    if model.flavor is Flavor.FRF:
        leaf_ids = np.array([tree.apply(model.predictor_spaces, blocks) for tree in model.trees])
        return np.stack([_aggregate_trees(model, [tree.leaves[leaf_ids[b, q]].value
                                                  for b, tree in enumerate(model.trees)]) for q in range(m)])
    W = forest_weight_matrix(model, blocks)
    return np.stack([_aggregate(model, w) for w in W])


def predict_one(model, x):
    """Forest prediction at a single query given as a list of blocks"""
    return predict(model, [np.asarray(block, dtype=float)[None, ...] for block in x])[0]


def oob_weight_matrix(model):
    """Out-of-bag forest weights of every training observation, shape ``(n, n)``

    Row ``i`` averages over the trees that left ``i`` out; rows without such trees are zero.
    """
    W = np.zeros((model.n, model.n))
    for b, tree in enumerate(model.trees):
        oob = np.flatnonzero(model.bootstrap_counts[b] == 0)
        leaf_ids = model.training_leaves[b, oob]
        for leaf_id in np.unique(leaf_ids):
            leaf = tree.leaves[leaf_id]
            W[np.ix_(oob[leaf_ids == leaf_id], leaf.members)] += leaf.weights
    n_oob = (model.bootstrap_counts == 0).sum(axis=0)
    covered = n_oob > 0
    W[covered] /= n_oob[covered, None]
    return W


def oob_predict(model, i, weights=None):
    """Out-of-bag prediction at training observation ``i``

    :param ForestModel model: The fitted forest
    :param int i: The training index
    :param np.ndarray weights: Precomputed row ``i`` of :func:`oob_weight_matrix`

    :raises NoOobTreesError: When ``i`` is in-bag for every tree
    """
    trees = model.oob_trees(i)
    if trees.size == 0:
        raise NoOobTreesError(i)
    return training_prediction(model, i, trees, exclude=[i], weights=weights)


def training_prediction(model, i, trees, exclude=(), weights=None):
    """Prediction at training observation ``i`` aggregating only ``trees``

    :param ForestModel model: The fitted forest
    :param int i: The training index
    :param trees: The trees to aggregate over
    :param exclude: Training indices that may not serve as medoid candidates
    :param np.ndarray weights: Precomputed forest weights of ``i`` over ``trees``
    """
    trees = np.asarray(trees, dtype=int)
    if model.flavor is Flavor.FRF:
        return _aggregate_trees(model, [model.trees[b].leaves[model.training_leaves[b, i]].value for b in trees])
    if weights is None:
        weights = forest_weights(model, model.training.predictor(i), trees).weights
    return _aggregate(model, weights, exclude)


def oob_predictions(model):
    """Out-of-bag predictions at every training observation that has out-of-bag trees

    :returns: ``(indices, predictions)`` with the retained training indices in increasing order
    """
    W = None if model.flavor is Flavor.FRF else oob_weight_matrix(model)
    indices, predictions = [], []
    for i in range(model.n):
        try:
            predictions.append(oob_predict(model, i, None if W is None else W[i]))
        except NoOobTreesError:
            logger.debug("observation %d is in-bag for every tree", i)
            continue
        indices.append(i)
    shape = (0,) + model.response_space.shape
    return np.array(indices, dtype=int), np.stack(predictions) if predictions else np.empty(shape)


def tune_hyperparameters(dataset, flavor=Flavor.RFWLCFR, grid=None, folds=5, rng=0, base=None, n_jobs=1):
    """Pick ``(min_split_size, mtry)`` by k-fold cross-validated mean squared prediction distance

    Every grid point is scored on the same folds with the same per-fold random streams. Ties go to the smallest
    minimum split size, then the smallest ``mtry``.

    :param Dataset dataset: The training sample
    :param Flavor flavor: The aggregation flavor
    :param grid: Iterable of ``(min_split_size, mtry)`` pairs; defaults to ``{1, 5, 10} x {1, ..., p}``
    :param int folds: Number of folds
    :param rng: Seed, generator or :class:`RngStream`
    :param ForestHyperparameters base: Supplies the number of trees

    :returns: The selected :class:`ForestHyperparameters`
    """
    base = base or ForestHyperparameters()
    if folds < 2 or dataset.n < folds:
        raise FitError(f"{folds}-fold cross-validation needs at least {max(folds, 2)} observations and folds")
    if grid is None:
        grid = itertools.product(MIN_SPLIT_GRID, range(1, dataset.p + 1))
    grid = sorted((int(s), int(m)) for s, m in grid)
    if not grid:
        raise FitError("the tuning grid is empty")
    stream = as_stream(rng)
    parts = np.array_split(stream.spawn(0).permutation(dataset.n), folds)
    space = dataset.response_space

    best, best_error = None, np.inf
    for min_split_size, mtry in grid:
        candidate = replace(base, mtry=mtry, min_split_size=min_split_size)
        total = 0.
        for k, test in enumerate(parts):
            train = np.setdiff1d(np.arange(dataset.n), test)
            model = fit_forest(dataset.subset(train), flavor, candidate, stream.spawn(1, k), n_jobs)
            held_out = dataset.subset(test)
            prediction = predict(model, held_out.predictors)
            total += sum(space.distance(prediction[q], held_out.responses[q]) ** 2 for q in range(len(test)))
        error = total / dataset.n
        logger.debug("min split size %d, mtry %d: cross-validated error %.6g", min_split_size, mtry, error)
        if error < best_error:
            best, best_error = candidate, error
    logger.info("selected min split size %d and mtry %d", best.min_split_size, best.mtry)
    return best.resolve(dataset.p)
