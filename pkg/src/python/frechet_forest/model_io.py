"""Versioned JSON model files

A model file is a single JSON object::

    {
      "format_version": 1,
      "tool": "frechet-forest", "version": "...",
      "flavor": "mrf",
      "hyperparameters": {"n_trees": 200, "mtry": 2, "min_split_size": 5},
      "seed": 12, "key": [],
      "predictors": "product[euclidean:1,sphere:3]", "response": "sphere:3",
      "training": {"X": [[...], ...], "Y": [[...], ...]},
      "bootstrap_counts": [[...], ...],
      "trees": [[node, ...], ...],
      "extra": {...}
    }

Every tree is a preorder list of nodes. Internal nodes are ``{"feature": j, "left_center": [...], "right_center":
[...], "left": k, "right": l}`` with ``k`` and ``l`` indices into the same list; leaves are ``{"members": [...],
"counts": [...], "value": [...] | null}``. Floats are written with their shortest round-trip representation, so a
loaded model predicts bit-identically.
"""

import json
import logging

import numpy as np

from .dataset import TOOL_NAME, Dataset
from .errors import ConfigurationError, FrechetForestError
from .forest import Flavor, ForestHyperparameters, ForestModel, SplitRule, Tree, TreeNode
from .metric import SpaceDescriptor, space_for

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _flat(array):
    return np.asarray(array, dtype=float).reshape(-1).tolist()


def _encode_tree(tree):
    """Preorder node records, left subtree first"""
    nodes = []
    root = tree.root
    pending = [(root, None, None)]
    while pending:
        node, parent, side = pending.pop()
        position = len(nodes)
        if parent is not None:
            nodes[parent][side] = position
        if node.is_leaf:
            nodes.append({"members": node.members.tolist(), "counts": node.counts.tolist(),
                          "value": None if node.value is None else _flat(node.value)})
            continue
        nodes.append({"feature": node.rule.feature, "left_center": _flat(node.rule.left_center),
                      "right_center": _flat(node.rule.right_center)})
        pending += [(node.right, position, "right"), (node.left, position, "left")]
    return nodes


def _decode_tree(records, predictor_spaces, response_space):
    tree = Tree(None)
    built = [None] * len(records)
    for position in reversed(range(len(records))):
        record = records[position]
        if "members" in record:
            value = record.get("value")
            node = TreeNode(np.asarray(record["members"], dtype=int), np.asarray(record["counts"], dtype=float),
                            value=None if value is None else response_space.unflatten(np.asarray([value]))[0])
        else:
            space = predictor_spaces[record["feature"]]
            centers = space.unflatten(np.asarray([record["left_center"], record["right_center"]]))
            node = TreeNode(None, None, SplitRule(int(record["feature"]), centers[0], centers[1]),
                            built[record["left"]], built[record["right"]])
        built[position] = node
    tree.root = built[0]
    for node in tree.nodes():
        if node.is_leaf:
            node.leaf_id = len(tree.leaves)
            tree.leaves.append(node)
    return tree


def model_record(model, extra=None):
    """The JSON-ready dictionary of a fitted model"""
    from . import __version__
    training = model.training
    return {
        "format_version": FORMAT_VERSION,
        "tool": TOOL_NAME,
        "version": __version__,
        "flavor": model.flavor.value,
        "hyperparameters": {"n_trees": model.hyperparameters.n_trees, "mtry": model.hyperparameters.mtry,
                            "min_split_size": model.hyperparameters.min_split_size},
        "seed": model.seed,
        "key": list(model.key),
        "predictors": str(model.predictor_descriptor),
        "response": str(model.response_descriptor),
        "training": {"X": space_for(training.predictor_descriptor).flatten(training.predictors).tolist(),
                     "Y": training.response_space.flatten(training.responses).tolist()},
        "bootstrap_counts": model.bootstrap_counts.tolist(),
        "trees": [_encode_tree(tree) for tree in model.trees],
        "extra": dict(extra or {}),
    }


def save_model(model, path, extra=None):
    """Write a model file

    :param ForestModel model: The fitted forest
    :param path: Output path or open text stream
    :param dict extra: Additional JSON-serializable annotations, e.g. tuning results
    """
    text = json.dumps(model_record(model, extra), allow_nan=False)
    if hasattr(path, "write"):
        path.write(text)
        return
    with open(path, "w") as f:
        f.write(text)
    logger.debug("wrote %s model with %d trees to %s", model.flavor.value, model.n_trees, path)


def model_from_record(record):
    """Rebuild a :class:`ForestModel` from :func:`model_record` output

    :returns: ``(model, extra)``
    """
    if not isinstance(record, dict):
        raise ConfigurationError("a model file must hold a JSON object")
    version = record.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported model format version {version!r}, expected {FORMAT_VERSION}")
    try:
        predictor_descriptor = SpaceDescriptor.parse(record["predictors"]).as_product()
        response_descriptor = SpaceDescriptor.parse(record["response"])
        predictor_space = space_for(predictor_descriptor)
        response_space = space_for(response_descriptor)
        X = np.asarray(record["training"]["X"], dtype=float).reshape(-1, predictor_descriptor.size)
        Y = np.asarray(record["training"]["Y"], dtype=float).reshape(-1, response_descriptor.size)
        training = Dataset(predictor_descriptor, response_descriptor, tuple(predictor_space.unflatten(X)),
                           response_space.unflatten(Y))
        trees = [_decode_tree(nodes, predictor_space.spaces, response_space) for nodes in record["trees"]]
        counts = np.asarray(record["bootstrap_counts"], dtype=int).reshape(len(trees), training.n)
        hyperparameters = ForestHyperparameters(**record["hyperparameters"])
        model = ForestModel(Flavor(record["flavor"]), hyperparameters, training, trees, counts, record.get("seed"),
                            tuple(record.get("key", ())))
    except FrechetForestError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as err:
        raise ConfigurationError(f"malformed model file: {err!r}")
    return model, record.get("extra", {})


def load_model(path):
    """Read a model file written by :func:`save_model`

    :returns: ``(model, extra)``
    """
    try:
        if hasattr(path, "read"):
            record = json.load(path)
        else:
            with open(path) as f:
                record = json.load(f)
    except OSError as err:
        raise ConfigurationError(f"cannot read model file {path}: {err}")
    except json.JSONDecodeError as err:
        raise ConfigurationError(f"model file {path} is not valid JSON: {err}")
    return model_from_record(record)
