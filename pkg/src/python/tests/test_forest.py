import numpy as np
import pytest

from frechet_forest.dataset import Dataset
from frechet_forest.errors import DescriptorMismatchError, FitError, NoOobTreesError, NoSplitError, \
    UnsupportedSpaceError
from frechet_forest.forest import Flavor, ForestHyperparameters, ForestModel, Tree, TreeNode, bootstrap_counts, \
    cart_gain, fit_forest, forest_weight_matrix, forest_weights, grow_tree, node_variance, oob_predict, \
    oob_predictions, oob_weight_matrix, predict, predict_one, tune_hyperparameters, two_means_split
from frechet_forest.metric import SpaceDescriptor, space_for
from frechet_forest.sampling import RngStream, sample_vmf
from frechet_forest.scenarios import ScenarioSpec, generate_scenario

EUCLIDEAN_1 = SpaceDescriptor.parse("euclidean:1")


def _line_dataset(x, y):
    return Dataset(SpaceDescriptor.parse("product[euclidean:1]"), EUCLIDEAN_1,
                   (np.asarray(x, dtype=float)[:, None],), np.asarray(y, dtype=float)[:, None])


data = []

data += [([0., 0., 0., 10., 10.], {0., 10.})]
data += [([3., 7.], {3., 7.})]
data += [([2., 2., 5., 5., 5., 5.], {2., 5.})]


@pytest.mark.parametrize("values, answer", data)
def test_two_means_split(values, answer):
    """
    Test 2-means centers on separated one-dimensional clusters

    :param list values: The feature values of the node
    :param set answer: The expected centers
    """

    space = space_for(EUCLIDEAN_1)
    values = np.array(values)[:, None]

    left_center, right_center, left = two_means_split(space, values, rng=RngStream(70))

    assert {float(left_center[0]), float(right_center[0])} == answer
    assert np.array_equal(left, np.abs(values[:, 0] - left_center[0]) <= np.abs(values[:, 0] - right_center[0]))


def test_two_means_identical():
    """
    Test that a node with a single distinct value cannot be split
    """

    with pytest.raises(NoSplitError):
        two_means_split(space_for(EUCLIDEAN_1), np.full((4, 1), 2.))


def test_two_means_random_partitions(stream):
    """
    Test that the 2-means partition beats random binary partitions in within-cluster sum of squares
    """

    values = stream.standard_normal((20, 1))

    def sse(mask):
        return sum(np.sum((values[m] - values[m].mean()) ** 2) for m in (mask, ~mask) if m.any())

    _, _, left = two_means_split(space_for(EUCLIDEAN_1), values, rng=stream)

    for _ in range(50):
        mask = stream.random(20) < 0.5
        assert sse(left) <= sse(mask) + 1e-12


def test_two_means_on_sphere(stream):
    """
    Test 2-means with Fréchet-mean centers on a sphere-valued predictor
    """

    space = space_for(SpaceDescriptor.parse("sphere:3"))
    north = np.array([0., 0., 1.])
    south = np.array([0., 0., -1.])
    values = np.vstack([sample_vmf(north, 100., stream, size=10), sample_vmf(south, 100., stream, size=10)])

    left_center, right_center, left = two_means_split(space, values, rng=stream)

    assert left.sum() == 10
    assert np.all(left[:10]) or not np.any(left[:10])
    space.validate(np.stack([left_center, right_center]))


data = []

data += [([0., 0., 10., 10.], [True, True, False, False], 25.)]
data += [([4., 4., 4., 4.], [True, False, True, False], 0.)]
data += [([0., 0., 10., 10.], [True, False, True, False], 0.)]


@pytest.mark.parametrize("responses, left, answer", data)
def test_cart_gain(responses, left, answer):
    """
    Test the reduction of Fréchet variance of known partitions

    :param list responses: The node responses
    :param list left: The left-child mask
    :param float answer: The expected gain
    """

    gain = cart_gain(space_for(EUCLIDEAN_1), np.array(responses)[:, None], None, np.array(left))

    assert np.isclose(gain, answer)


def test_cart_gain_brute_force(stream):
    """
    Test the gain of a random bootstrap-weighted node against its definition
    """

    responses = stream.standard_normal((15, 1))
    weights = stream.integers(1, 4, size=15).astype(float)
    left = stream.random(15) < 0.4
    left[0], left[1] = True, False

    def variance(mask):
        y, w = responses[mask, 0], weights[mask]
        return np.sum(w * (y - np.average(y, weights=w)) ** 2) / w.sum()

    expected = (variance(np.ones(15, dtype=bool)) - weights[left].sum() / weights.sum() * variance(left)
                - weights[~left].sum() / weights.sum() * variance(~left))

    gain = cart_gain(space_for(EUCLIDEAN_1), responses, weights, left)

    assert np.isclose(gain, expected, rtol=0., atol=1e-10)
    assert np.isclose(node_variance(space_for(EUCLIDEAN_1), responses, weights), variance(np.ones(15, dtype=bool)))


def test_cart_gain_empty_child():
    """
    Test that a partition with an empty side is rejected
    """

    with pytest.raises(NoSplitError):
        cart_gain(space_for(EUCLIDEAN_1), np.zeros((3, 1)), None, np.ones(3, dtype=bool))


def test_grow_separable():
    """
    Test that separable two-cluster data gives a root split into two pure leaves
    """

    dataset = _line_dataset([0., 0.1, 1., 1.1], [0., 0., 10., 10.])

    tree = grow_tree(dataset, np.ones(4, dtype=int), ForestHyperparameters(min_split_size=1), RngStream(71))

    assert not tree.root.is_leaf
    assert tree.depth == 1
    assert sorted(tree.root.left.members.tolist() + tree.root.right.members.tolist()) == [0, 1, 2, 3]
    assert {tuple(leaf.members) for leaf in tree.leaves} == {(0, 1), (2, 3)}


def test_grow_single_observation():
    """
    Test that a one-observation sample is a single leaf
    """

    tree = grow_tree(_line_dataset([1.], [3.]), np.array([1]), ForestHyperparameters(), RngStream(72))

    assert tree.root.is_leaf
    assert len(tree.leaves) == 1


def test_grow_empty_bootstrap():
    """
    Test that empty bootstrap samples are rejected
    """

    with pytest.raises(FitError):
        grow_tree(_line_dataset([1., 2.], [3., 4.]), np.zeros(2, dtype=int), ForestHyperparameters(),
                  RngStream(72))


def test_partition_and_impurity(euclidean_forest):
    """
    Test that every tree partitions its bootstrap sample and never increases the leaf-weighted variance
    """

    space = euclidean_forest.response_space
    Y = euclidean_forest.training.responses

    for b, tree in enumerate(euclidean_forest.trees):
        counts = euclidean_forest.bootstrap_counts[b]
        members = np.concatenate([leaf.members for leaf in tree.leaves])
        assert np.array_equal(np.sort(members), np.flatnonzero(counts))
        assert sum(leaf.counts.sum() for leaf in tree.leaves) == counts.sum() == euclidean_forest.n
        root = node_variance(space, Y[tree.root.members], tree.root.counts)
        leaves = sum(leaf.counts.sum() * node_variance(space, Y[leaf.members], leaf.counts)
                     for leaf in tree.leaves) / counts.sum()
        assert leaves <= root + 1e-12
        for node in tree.nodes():
            if not node.is_leaf:
                assert cart_gain(space, Y[node.members], node.counts,
                                 np.isin(node.members, node.left.members)) > 0.


def test_weights(euclidean_forest, euclidean_dataset):
    """
    Test that forest weights are stochastic and that the Euclidean prediction is the weighted response mean
    """

    queries = [block[:10] for block in euclidean_dataset.predictors]

    W = forest_weight_matrix(euclidean_forest, queries)
    predictions = predict(euclidean_forest, queries)

    assert np.allclose(W.sum(axis=1), 1., rtol=0., atol=1e-12)
    assert np.all((W >= 0.) & (W <= 1.))
    assert np.allclose(predictions, W @ euclidean_dataset.responses, rtol=0., atol=1e-10)
    single = forest_weights(euclidean_forest, euclidean_dataset.predictor(0))
    assert np.allclose(single.weights, W[0])
    assert np.allclose(predict_one(euclidean_forest, euclidean_dataset.predictor(0)), predictions[0])


def _hand_built_model(leaf_members, leaf_counts):
    dataset = _line_dataset([0., 1., 2., 3.], [0., 1., 2., 3.])
    trees = []
    for members, counts in zip(leaf_members, leaf_counts):
        leaf = TreeNode(np.array(members), np.array(counts, dtype=float), leaf_id=0)
        trees.append(Tree(leaf, [leaf]))
    counts = np.zeros((len(trees), 4), dtype=int)
    for b, (members, multiplicity) in enumerate(zip(leaf_members, leaf_counts)):
        counts[b, members] = multiplicity
    return ForestModel(Flavor.RFWLCFR, ForestHyperparameters(len(trees), 1, 1), dataset, trees, counts)


data = []

data += [([[0, 1]], [[1, 1]], [0.5, 0.5, 0., 0.])]
data += [([[0], [1]], [[1], [1]], [0.5, 0.5, 0., 0.])]
data += [([[0, 1]], [[2, 1]], [2. / 3., 1. / 3., 0., 0.])]


@pytest.mark.parametrize("leaf_members, leaf_counts, answer", data)
def test_hand_built_weights(leaf_members, leaf_counts, answer):
    """
    Test leaf-uniform weights counted with bootstrap multiplicity and averaged over trees

    :param list leaf_members: The members of each tree's single leaf
    :param list leaf_counts: Their bootstrap multiplicities
    :param list answer: The expected weights
    """

    model = _hand_built_model(leaf_members, leaf_counts)

    weights = forest_weights(model, [np.array([1.5])])

    assert np.allclose(weights.weights, answer)
    with pytest.raises(FitError):
        forest_weights(model, [np.array([1.5])], restrict_to_trees=[])


@pytest.mark.parametrize("n_trees", [1, 10])
def test_euclidean_reduction(euclidean_dataset, n_trees):
    """
    Test that averaging tree means and weighting responses agree on Euclidean responses

    :param int n_trees: The number of trees
    """

    hyperparameters = ForestHyperparameters(n_trees=n_trees, min_split_size=3)
    frf = fit_forest(euclidean_dataset, Flavor.FRF, hyperparameters, rng=5)
    weighted = fit_forest(euclidean_dataset, Flavor.RFWLCFR, hyperparameters, rng=5)
    queries = [block[:15] for block in euclidean_dataset.predictors]

    assert np.array_equal(frf.bootstrap_counts, weighted.bootstrap_counts)
    assert np.allclose(predict(frf, queries), predict(weighted, queries), rtol=0., atol=1e-10)


@pytest.mark.parametrize("flavor", [Flavor.FRF, Flavor.RFWLCFR, Flavor.MRF])
def test_constant_responses(flavor, sphere_dataset):
    """
    Test that a constant response is predicted exactly by every flavor

    :param Flavor flavor: The aggregation flavor
    """

    y = np.array([0., 0.6, 0.8])
    dataset = Dataset(sphere_dataset.predictor_descriptor, sphere_dataset.response_descriptor,
                      sphere_dataset.predictors, np.tile(y, (sphere_dataset.n, 1)))

    model = fit_forest(dataset, flavor, ForestHyperparameters(n_trees=5), rng=6)

    assert np.allclose(predict(model, [block[:5] for block in dataset.predictors]), y)


def test_medoid_predictions(sphere_dataset):
    """
    Test that medoid forests predict training responses and exclude the observation itself out of bag
    """

    model = fit_forest(sphere_dataset, Flavor.MRF, ForestHyperparameters(n_trees=30), rng=7)

    predictions = predict(model, [block[:5] for block in sphere_dataset.predictors])
    indices, oob = oob_predictions(model)

    responses = sphere_dataset.responses
    for y in predictions:
        assert np.any(np.all(np.isclose(responses, y), axis=1))
    for i, y in zip(indices, oob):
        assert not np.allclose(y, responses[i])


def test_deterministic(euclidean_dataset, euclidean_forest):
    """
    Test that a seed reproduces bootstrap samples and trees regardless of the number of workers
    """

    again = fit_forest(euclidean_dataset, Flavor.RFWLCFR, ForestHyperparameters(n_trees=40, min_split_size=5), rng=3,
                       n_jobs=2)
    queries = [block[:10] for block in euclidean_dataset.predictors]

    assert np.array_equal(again.bootstrap_counts, euclidean_forest.bootstrap_counts)
    assert np.array_equal(again.training_leaves, euclidean_forest.training_leaves)
    assert np.array_equal(predict(again, queries), predict(euclidean_forest, queries))


def test_oob_fraction():
    """
    Test that an observation is left out of about ``1/e`` of the bootstrap samples
    """

    stream = RngStream(73)
    counts = np.array([bootstrap_counts(500, stream.spawn(b)) for b in range(1000)])

    fraction = np.mean(counts == 0, axis=0)

    assert np.all(counts.sum(axis=1) == 500)
    assert abs(fraction.mean() - np.exp(-1.)) < 0.01
    assert np.all(np.abs(fraction - np.exp(-1.)) < 0.06)


def test_oob_isolation(euclidean_forest):
    """
    Test that out-of-bag weights are the forest weights over the trees leaving the observation out
    """

    W = oob_weight_matrix(euclidean_forest)

    for i in range(0, euclidean_forest.n, 7):
        trees = euclidean_forest.oob_trees(i)
        expected = forest_weights(euclidean_forest, euclidean_forest.training.predictor(i), trees).weights
        assert np.allclose(W[i], expected)
        assert np.allclose(oob_predict(euclidean_forest, i), W[i] @ euclidean_forest.training.responses)


def test_oob_single_tree(euclidean_dataset):
    """
    Test that one tree gives out-of-bag predictions only for the observations it left out
    """

    model = fit_forest(euclidean_dataset, Flavor.FRF, ForestHyperparameters(n_trees=1), rng=8)

    indices, predictions = oob_predictions(model)

    assert np.array_equal(indices, np.flatnonzero(model.bootstrap_counts[0] == 0))
    leaf_ids = model.training_leaves[0, indices]
    assert np.allclose(predictions, np.stack([model.trees[0].leaves[k].value for k in leaf_ids]))
    with pytest.raises(NoOobTreesError):
        oob_predict(model, int(np.flatnonzero(model.bootstrap_counts[0])[0]))


@pytest.mark.slow
def test_oob_error_tracks_test_error():
    """
    Test that the out-of-bag error estimates the held-out error of the full forest, averaged over replicates
    """

    spec = ScenarioSpec("euclidean_linear", n=200)
    stream = RngStream(74)
    oob_errors, test_errors = [], []
    for r in range(5):
        train, _ = generate_scenario(spec, stream.spawn(r, 0))
        test, _ = generate_scenario(spec, stream.spawn(r, 1), n=2000)
        model = fit_forest(train, Flavor.RFWLCFR, ForestHyperparameters(n_trees=200), rng=stream.spawn(r, 2))
        indices, oob = oob_predictions(model)
        oob_errors.append(np.mean(np.sum((oob - train.responses[indices]) ** 2, axis=1)))
        test_errors.append(np.mean(np.sum((predict(model, test.predictors) - test.responses) ** 2, axis=1)))

    assert abs(np.mean(oob_errors) - np.mean(test_errors)) < 0.15 * np.mean(test_errors)


data = []

data += [(ForestHyperparameters(n_trees=0))]
data += [(ForestHyperparameters(mtry=4))]
data += [(ForestHyperparameters(mtry=0))]
data += [(ForestHyperparameters(min_split_size=0))]


@pytest.mark.parametrize("hyperparameters", data)
def test_bad_hyperparameters(hyperparameters, euclidean_dataset):
    """
    Test that invalid forest sizes, feature counts and split sizes are rejected

    :param ForestHyperparameters hyperparameters: The invalid hyperparameters
    """

    with pytest.raises(FitError):
        fit_forest(euclidean_dataset, Flavor.RFWLCFR, hyperparameters)


def test_means_required():
    """
    Test that mean-based flavors refuse responses without Fréchet means
    """

    dataset, _ = generate_scenario(ScenarioSpec("sphere_anisotropic", n=20, spheroid_a=0.5), RngStream(76))

    with pytest.raises(UnsupportedSpaceError):
        fit_forest(dataset, Flavor.RFWLCFR, ForestHyperparameters(n_trees=2))
    assert fit_forest(dataset, Flavor.MRF, ForestHyperparameters(n_trees=2)).n_trees == 2


def test_query_mismatch(euclidean_forest):
    """
    Test that queries must match the predictor space of the forest
    """

    with pytest.raises(DescriptorMismatchError):
        predict(euclidean_forest, [np.zeros((1, 1))])
    with pytest.raises(DescriptorMismatchError):
        predict(euclidean_forest, [np.zeros((1, 2))] * 3)
    assert predict(euclidean_forest, [np.zeros((0, 1))] * 3).shape == (0, 1)


def test_tune_single_point(euclidean_dataset):
    """
    Test that a one-point grid selects that point
    """

    selected = tune_hyperparameters(euclidean_dataset, Flavor.RFWLCFR, grid=[(10, 2)], folds=3, rng=10,
                                    base=ForestHyperparameters(n_trees=5))

    assert (selected.min_split_size, selected.mtry, selected.n_trees) == (10, 2, 5)


def test_tune_grid(euclidean_dataset):
    """
    Test that the default grid selection is a member of the grid
    """

    selected = tune_hyperparameters(euclidean_dataset, Flavor.RFWLCFR, folds=3, rng=11,
                                    base=ForestHyperparameters(n_trees=5))

    assert selected.min_split_size in (1, 5, 10)
    assert 1 <= selected.mtry <= 3


def test_tune_bad_folds():
    """
    Test that more folds than observations are rejected
    """

    with pytest.raises(FitError):
        tune_hyperparameters(_line_dataset([0., 1., 2.], [0., 1., 2.]), folds=5)
