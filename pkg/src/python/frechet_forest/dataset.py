"""Paired predictor/response samples and their CSV representation

A dataset CSV holds one column per flat coordinate: ``x{j}_{k}`` for coordinate ``k`` of predictor component ``j``
and ``y_{k}`` for coordinate ``k`` of the response (both 1-based). SPD matrices are flattened in row-major order.
The first line is a metadata comment naming the descriptors::

    # frechet-forest 0.1.0 predictors=product[euclidean:1,euclidean:1] response=sphere:3 seed=12

Descriptors given explicitly take precedence over the metadata comment.
"""

import io
import logging
from dataclasses import dataclass

import numpy as np
import pandas

from .errors import ConfigurationError, DataFormatError, DescriptorMismatchError, InvalidPointError
from .metric import SpaceDescriptor, space_for

logger = logging.getLogger(__name__)

TOOL_NAME = "frechet-forest"


@dataclass(frozen=True)
class Dataset:
    """Stacked predictor blocks and responses

    :param SpaceDescriptor predictor_descriptor: The product space of the predictors
    :param SpaceDescriptor response_descriptor: The response space
    :param tuple predictors: One stack per predictor component, each of shape ``(n, *shape_j)``
    :param np.ndarray responses: The response stack, shape ``(n, *shape)``
    """

    predictor_descriptor: SpaceDescriptor
    response_descriptor: SpaceDescriptor
    predictors: tuple
    responses: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "predictor_descriptor", self.predictor_descriptor.as_product())
        object.__setattr__(self, "predictors", tuple(np.asarray(block, dtype=float) for block in self.predictors))
        object.__setattr__(self, "responses", np.asarray(self.responses, dtype=float))
        if len(self.predictors) != len(self.predictor_descriptor.components):
            raise DescriptorMismatchError(f"{len(self.predictors)} predictor blocks for "
                                          f"{self.predictor_descriptor}")
        for block in self.predictors:
            if len(block) != len(self.responses):
                raise DataFormatError(f"{len(block)} predictor rows but {len(self.responses)} responses")

    def __len__(self):
        return len(self.responses)

    @property
    def n(self):
        return len(self.responses)

    @property
    def p(self):
        return len(self.predictors)

    @property
    def predictor_space(self):
        return space_for(self.predictor_descriptor)

    @property
    def response_space(self):
        return space_for(self.response_descriptor)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=int)
        return Dataset(self.predictor_descriptor, self.response_descriptor,
                       tuple(block[indices] for block in self.predictors), self.responses[indices])

    def predictor(self, i):
        """The predictor of observation ``i`` as a list of single-point blocks"""
        return [block[i] for block in self.predictors]

    def validate(self):
        """Check every point, naming the 1-based data row of the first violation"""
        for block, space in zip(self.predictors, self.predictor_space.spaces):
            _validate_rows(space, block)
        _validate_rows(self.response_space, self.responses)
        return self


def _validate_rows(space, points):
    if len(points) == 0:
        return
    try:
        space.validate(points)
    except InvalidPointError as err:
        index = err.index if err.index is not None else 0
        raise InvalidPointError(f"Row {index + 1}: {err}", index=index)


def predictor_columns(descriptor):
    descriptor = descriptor.as_product()
    return [f"x{j + 1}_{k + 1}" for j, component in enumerate(descriptor.components) for k in range(component.size)]


def response_columns(descriptor):
    return [f"y_{k + 1}" for k in range(descriptor.size)]


def metadata_line(version, seed=None, config_hash=None, **extra):
    """The comment line recording tool version, seed, configuration hash and descriptors"""
    fields = [f"# {TOOL_NAME} {version}"]
    for key, value in list(extra.items()) + [("seed", seed), ("config_hash", config_hash)]:
        if value is not None:
            fields.append(f"{key}={value}")
    return " ".join(fields)


def parse_metadata(line):
    """Key/value pairs of a metadata comment line"""
    tokens = line.lstrip("#").split()
    out = {}
    if len(tokens) >= 2 and tokens[0] == TOOL_NAME:
        out["version"] = tokens[1]
        tokens = tokens[2:]
    for token in tokens:
        if "=" in token:
            key, value = token.split("=", 1)
            out[key] = value
    return out


def _package_version():
    from . import __version__
    return __version__


def write_csv(frame, path, metadata=None):
    """Write a frame with a leading metadata comment to a path or an open text stream"""
    text = (metadata + "\n" if metadata else "") + frame.to_csv(index=False, lineterminator="\n")
    if hasattr(path, "write"):
        path.write(text)
        return
    with open(path, "w", newline="") as f:
        f.write(text)


def _read_text(path):
    if hasattr(path, "read"):
        return path.read()
    try:
        with open(path) as f:
            return f.read()
    except OSError as err:
        raise ConfigurationError(f"cannot read {path}: {err}")


def _read_frame(path):
    """Parse a CSV into a frame of floats and its metadata"""
    text = _read_text(path)
    metadata = {}
    for line in text.splitlines():
        if line.startswith("#"):
            metadata.update(parse_metadata(line))
        elif line.strip():
            break
    try:
        frame = pandas.read_csv(io.StringIO(text), comment="#", dtype=str, skip_blank_lines=True)
    except pandas.errors.EmptyDataError:
        raise DataFormatError(f"{path} has no header row")
    except pandas.errors.ParserError as err:
        raise DataFormatError(f"{path}: {err}")
    frame.columns = [str(column).strip() for column in frame.columns]
    numeric = pandas.DataFrame({column: pandas.to_numeric(frame[column].str.strip(), errors="coerce")
                                for column in frame.columns}, index=frame.index, columns=frame.columns)
    bad = numeric.isna().any(axis=1).to_numpy()
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        column = numeric.columns[numeric.iloc[row].isna().to_numpy()][0]
        raise DataFormatError(f"Row {row + 1}: missing or non-numeric value in column '{column}'")
    return numeric, metadata


def _resolve(descriptor, metadata, key, path):
    if descriptor is not None:
        return descriptor if isinstance(descriptor, SpaceDescriptor) else SpaceDescriptor.parse(descriptor)
    if key in metadata:
        return SpaceDescriptor.parse(metadata[key])
    raise ConfigurationError(f"{path}: no {key} descriptor given and none recorded in the metadata line")


def _take(frame, columns, path):
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise DataFormatError(f"{path}: missing columns {', '.join(missing)}")
    return frame[columns].to_numpy(dtype=float)


def _blocks(flat, descriptor):
    return tuple(space_for(descriptor.as_product()).unflatten(flat))


def read_dataset(path, predictor_descriptor=None, response_descriptor=None):
    """Read and validate a dataset CSV

    :param path: A file path or open text stream
    :param predictor_descriptor: The predictor descriptor (or its text); read from the metadata when None
    :param response_descriptor: The response descriptor (or its text); read from the metadata when None

    :returns: A validated :class:`Dataset`
    """
    frame, metadata = _read_frame(path)
    predictor_descriptor = _resolve(predictor_descriptor, metadata, "predictors", path).as_product()
    response_descriptor = _resolve(response_descriptor, metadata, "response", path)
    if response_descriptor.kind.value == "product":
        raise ConfigurationError("responses cannot live on a product space")
    x_columns = predictor_columns(predictor_descriptor)
    y_columns = response_columns(response_descriptor)
    extra = [column for column in frame.columns if column not in x_columns + y_columns]
    if extra:
        logger.warning("ignoring unexpected columns %s in %s", ", ".join(extra), path)
    X = _take(frame, x_columns, path)
    Y = _take(frame, y_columns, path)
    responses = space_for(response_descriptor).unflatten(Y)
    dataset = Dataset(predictor_descriptor, response_descriptor, _blocks(X, predictor_descriptor), responses)
    return dataset.validate()


def read_queries(path, predictor_descriptor=None, expected_descriptor=None):
    """Read predictor-only query points; a header-only file yields zero queries

    The query descriptor is ``predictor_descriptor`` when given, else the one of the metadata line, else
    ``expected_descriptor``.

    :param path: Input path or open text stream
    :param predictor_descriptor: Descriptor of the query predictors
    :param expected_descriptor: Descriptor the queries must match, e.g. the predictors of a fitted model

    :raises DescriptorMismatchError: When the query descriptor differs from ``expected_descriptor``

    :returns: A tuple of predictor blocks
    """
    frame, metadata = _read_frame(path)
    if predictor_descriptor is None and "predictors" not in metadata and expected_descriptor is not None:
        predictor_descriptor = expected_descriptor
    predictor_descriptor = _resolve(predictor_descriptor, metadata, "predictors", path).as_product()
    if expected_descriptor is not None:
        expected = _resolve(expected_descriptor, {}, "predictors", path).as_product()
        if predictor_descriptor != expected:
            raise DescriptorMismatchError(f"{path}: queries on {predictor_descriptor} for predictors {expected}")
    columns = predictor_columns(predictor_descriptor)
    if not set(columns) <= set(frame.columns):
        found = [column for column in frame.columns if column.startswith("x")]
        raise DescriptorMismatchError(f"{path}: query columns {found} do not match predictors "
                                      f"{predictor_descriptor}")
    blocks = _blocks(_take(frame, columns, path), predictor_descriptor)
    for block, space in zip(blocks, space_for(predictor_descriptor).spaces):
        _validate_rows(space, block)
    return blocks


def dataset_frame(dataset):
    """The dataset as a frame with ``x{j}_{k}`` and ``y_{k}`` columns"""
    X = space_for(dataset.predictor_descriptor).flatten(dataset.predictors)
    Y = dataset.response_space.flatten(dataset.responses)
    return pandas.DataFrame(np.hstack([X, Y]), columns=predictor_columns(dataset.predictor_descriptor)
                            + response_columns(dataset.response_descriptor))


def write_dataset(dataset, path, metadata=None, **extra):
    """Write a dataset CSV

    :param Dataset dataset: The dataset
    :param path: Output path or open text stream
    :param str metadata: A full metadata line; built from the package version and ``extra`` when None
    """
    if metadata is None:
        metadata = metadata_line(_package_version(), predictors=dataset.predictor_descriptor,
                                 response=dataset.response_descriptor, **extra)
    write_csv(dataset_frame(dataset), path, metadata)
