"""
This file contains the deterministic random forest classifier:
bootstrap sampling and per-node random feature subsets drawn from splitmix64 streams,
greedy gini splits on midpoint thresholds, majority voting,
and the two feature importance measures (mean decrease in gini, out-of-bag permutation).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .constants import IMPORTANCE_METHOD, MAX_DEPTH, MIN_NODE_SIZE, N_TREES
from .data import Dataset
from .errors import ConfigError, DatasetError, DegenerateFoldError
from .rng import PERMUTATION_SALT, RandomStream, derive_seed

logger = logging.getLogger(__name__)

# gains closer than this are treated as ties
GAIN_TOLERANCE = 1e-12
LEAF = -1


class ImportanceMethod(str, Enum):
    MDI = 'mdi'
    OOB_PERMUTATION = 'oob'


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = N_TREES
    mtry: Optional[int] = None
    min_node_size: int = MIN_NODE_SIZE
    max_depth: Optional[int] = MAX_DEPTH
    importance_method: ImportanceMethod = ImportanceMethod(IMPORTANCE_METHOD)

    def __post_init__(self):
        try:
            object.__setattr__(self, 'importance_method', ImportanceMethod(self.importance_method))
        except ValueError:
            choices = ', '.join(method.value for method in ImportanceMethod)
            raise ConfigError(f"unknown importance method {self.importance_method!r}, "
                              f"expected one of {choices}") from None
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be at least 1, got {self.n_trees}")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError(f"mtry must be at least 1, got {self.mtry}")
        if self.min_node_size < 1:
            raise ConfigError(f"min_node_size must be at least 1, got {self.min_node_size}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError(f"max_depth must be non-negative, got {self.max_depth}")

    def resolve_mtry(self, n_features: int) -> int:
        mtry = self.mtry if self.mtry is not None else max(1, int(math.floor(math.sqrt(n_features))))
        if mtry > n_features:
            raise ConfigError(f"mtry {mtry} exceeds the {n_features} available features")
        return mtry

    def to_dict(self) -> dict:
        return {
            'n_trees': self.n_trees,
            'mtry': self.mtry,
            'min_node_size': self.min_node_size,
            'max_depth': self.max_depth,
            'importance_method': self.importance_method.value,
        }


@dataclass(frozen=True, eq=False)
class Tree:
    """
    Flat array form of a binary tree. Node 0 is the root.
    Internal nodes route value <= threshold to left and value > threshold to right,
    leaves have feature == -1. counts holds the (class 0, class 1) training counts of every node.
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def node_class(self) -> np.ndarray:
        # ties go to class 0
        return (self.counts[:, 1] > self.counts[:, 0]).astype(np.int64)

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of the matrix."""
        node = np.zeros(len(matrix), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            current = node[active]
            go_left = matrix[active, self.feature[current]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        return self.node_class[self.apply(matrix)]

    def to_dict(self) -> dict:
        return {
            'feature': self.feature.tolist(),
            'threshold': self.threshold.tolist(),
            'left': self.left.tolist(),
            'right': self.right.tolist(),
            'counts': self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> 'Tree':
        return cls(
            feature=np.asarray(doc['feature'], dtype=np.int64),
            threshold=np.asarray(doc['threshold'], dtype=np.float64),
            left=np.asarray(doc['left'], dtype=np.int64),
            right=np.asarray(doc['right'], dtype=np.int64),
            counts=np.asarray(doc['counts'], dtype=np.int64).reshape(-1, 2),
        )


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple
    config: ForestConfig
    seed: int
    oob_indices: tuple
    feature_names: tuple
    # bootstrap row indices of every tree (with repeats)
    bootstrap: tuple = field(default=())

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


@dataclass(frozen=True, eq=False)
class ImportanceVector:
    scores: np.ndarray
    method: ImportanceMethod

    def to_dict(self) -> dict:
        return {'method': ImportanceMethod(self.method).value, 'scores': [float(s) for s in self.scores]}


def gini_impurity(class_counts: Sequence[int]) -> float:
    c0, c1 = class_counts
    if c0 < 0 or c1 < 0:
        raise ValueError(f"class counts must be non-negative, got {class_counts}")
    total = c0 + c1
    if total == 0:
        raise ValueError("gini impurity of an empty node is undefined")
    p0, p1 = c0 / total, c1 / total
    return 1.0 - (p0 * p0 + p1 * p1)


def best_split_for_feature(values: np.ndarray, labels: np.ndarray) -> Optional[tuple[float, float]]:
    """
    Best gini split of one feature column.
    Returns (gain, threshold) or None when the column is constant.
    Thresholds are midpoints between consecutive distinct values, ties go to the lower threshold.
    """
    n = len(values)
    order = np.argsort(values, kind='mergesort')
    xs = values[order]
    ys = labels[order]
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    ones_total = int(ys.sum())
    zeros_total = n - ones_total
    ones_left = np.cumsum(ys)[:-1].astype(np.float64)
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    zeros_left = n_left - ones_left
    ones_right = ones_total - ones_left
    zeros_right = n_right - ones_right
    child = (zeros_left ** 2 + ones_left ** 2) / n_left + (zeros_right ** 2 + ones_right ** 2) / n_right
    gains = child / n - (zeros_total ** 2 + ones_total ** 2) / (n * n)
    gains = np.where(valid, gains, -np.inf)
    best = gains.max()
    position = int(np.flatnonzero(gains >= best - GAIN_TOLERANCE)[0])
    low, high = xs[position], xs[position + 1]
    threshold = (low + high) / 2.0
    if threshold >= high:
        # adjacent floats: the midpoint rounds up onto the upper value
        threshold = low
    return float(gains[position]), float(threshold)


def best_split(matrix: np.ndarray, labels: np.ndarray, features: Sequence[int]) -> Optional[tuple[int, float, float]]:
    """
    Best (feature, threshold, gain) over the candidate features.
    Ties go to the lower feature index, then to the lower threshold.
    """
    best = None
    for feature in sorted(features):
        found = best_split_for_feature(matrix[:, feature], labels)
        if found is None:
            continue
        gain, threshold = found
        if best is None or gain > best[2] + GAIN_TOLERANCE:
            best = (feature, threshold, gain)
    return best


def _dense_ranks(values: np.ndarray) -> np.ndarray:
    """Column-wise dense ranks: equal values share a rank and ranks follow value order."""
    order = np.argsort(values, axis=0, kind='stable')
    ordered = np.take_along_axis(values, order, axis=0)
    steps = np.zeros(values.shape, dtype=np.int64)
    steps[1:] = ordered[1:] > ordered[:-1]
    ranks = np.empty(values.shape, dtype=np.int64)
    np.put_along_axis(ranks, order, np.cumsum(steps, axis=0), axis=0)
    return ranks


def level_splits(values: np.ndarray, ranks: np.ndarray, labels: np.ndarray, local: np.ndarray,
                 candidates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Best split of every node of one tree level at once, with the rules of best_split.

    values, ranks: (m, p) rows of the level, labels (m,), local (m,) node of every row in [0, A),
    candidates: (A, p) mask of the features each node may split on; every node holds at least 2 rows.
    Returns (feature, threshold) per node, feature -1 where no candidate can split.
    """
    m, p = values.shape
    n_nodes = candidates.shape[0]
    sizes = np.bincount(local, minlength=n_nodes)
    ones = np.bincount(local, weights=labels, minlength=n_nodes)
    ends = np.cumsum(sizes)
    starts = ends - sizes
    # sort every column by (node, value): rows of a node are contiguous and ordered by value
    key = local[:, None] * (int(ranks.max()) + 1) + ranks
    order = np.argsort(key, axis=0, kind='stable')
    xs = np.take_along_axis(values, order, axis=0)
    rs = np.take_along_axis(ranks, order, axis=0)
    ys = labels[order]
    seg = np.repeat(np.arange(n_nodes), sizes)
    position = np.arange(m)

    cum = np.cumsum(ys, axis=0)
    before = np.zeros((n_nodes, p), dtype=cum.dtype)
    inner = starts > 0
    before[inner] = cum[starts[inner] - 1]
    ones_left = (cum - before[seg]).astype(np.float64)
    n_left = (position - starts[seg] + 1).astype(np.float64)[:, None]
    n = sizes[seg].astype(np.float64)[:, None]
    ones_total = ones[seg][:, None]
    zeros_total = n - ones_total
    n_right = n - n_left
    zeros_left = n_left - ones_left
    ones_right = ones_total - ones_left
    zeros_right = n_right - ones_right
    with np.errstate(divide='ignore', invalid='ignore'):
        child = (zeros_left ** 2 + ones_left ** 2) / n_left + (zeros_right ** 2 + ones_right ** 2) / n_right
        gains = child / n - (zeros_total ** 2 + ones_total ** 2) / (n * n)

    valid = np.zeros((m, p), dtype=bool)
    valid[:-1] = rs[1:] > rs[:-1]
    valid &= (position != ends[seg] - 1)[:, None]
    valid &= candidates[seg]
    gains = np.where(valid, gains, -np.inf)
    best = np.maximum.reduceat(gains, starts, axis=0)
    near = valid & (gains >= best[seg] - GAIN_TOLERANCE)
    first = np.minimum.reduceat(np.where(near, position[:, None], m), starts, axis=0)
    usable = first < m
    first = np.minimum(first, m - 2)
    chosen = gains[first, np.arange(p)]

    # lower feature index wins unless a later one is better by more than the tolerance
    feature = np.full(n_nodes, LEAF, dtype=np.int64)
    best_gain = np.full(n_nodes, -np.inf)
    for column in range(p):
        take = usable[:, column] & ((feature == LEAF) | (chosen[:, column] > best_gain + GAIN_TOLERANCE))
        feature[take] = column
        best_gain[take] = chosen[take, column]

    threshold = np.zeros(n_nodes, dtype=np.float64)
    split = np.flatnonzero(feature != LEAF)
    at = first[split, feature[split]]
    low = xs[at, feature[split]]
    high = xs[at + 1, feature[split]]
    middle = (low + high) / 2.0
    # adjacent floats: the midpoint rounds up onto the upper value
    threshold[split] = np.where(middle >= high, low, middle)
    return feature, threshold


def grow_tree(matrix: np.ndarray, labels: np.ndarray, rows: np.ndarray, config: ForestConfig,
              mtry: int, stream: RandomStream) -> Tree:
    """
    Grows one tree on matrix[rows] (rows may repeat), one depth level at a time.
    Node ids are given breadth first and the feature subsets of a level are drawn in node id order.
    """
    values = matrix[rows]
    y = np.asarray(labels[rows], dtype=np.int64)
    ranks = _dense_ranks(values)
    n, n_features = values.shape
    capacity = 2 * n - 1
    feature = np.full(capacity, LEAF, dtype=np.int64)
    threshold = np.zeros(capacity, dtype=np.float64)
    left = np.full(capacity, LEAF, dtype=np.int64)
    right = np.full(capacity, LEAF, dtype=np.int64)
    counts = np.zeros((capacity, 2), dtype=np.int64)
    counts[0] = (n - y.sum(), y.sum())
    n_nodes = 1
    node_of = np.zeros(n, dtype=np.int64)
    level = np.zeros(1, dtype=np.int64)
    depth = 0
    while level.size:
        if config.max_depth is not None and depth >= config.max_depth:
            break
        level_counts = counts[level]
        open_nodes = ((level_counts[:, 0] > 0) & (level_counts[:, 1] > 0)
                      & (level_counts.sum(axis=1) > config.min_node_size))
        level = level[open_nodes]
        if not level.size:
            break
        candidates = np.zeros((len(level), n_features), dtype=bool)
        drawn = stream.samples_without_replacement(n_features, mtry, len(level))
        candidates[np.arange(len(level))[:, None], drawn] = True

        local_of = np.full(n_nodes, -1, dtype=np.int64)
        local_of[level] = np.arange(len(level))
        local = local_of[node_of]
        members = np.flatnonzero(local >= 0)
        split_feature, split_threshold = level_splits(values[members], ranks[members], y[members],
                                                      local[members], candidates)
        split = np.flatnonzero(split_feature != LEAF)
        if not split.size:
            break
        parents = level[split]
        feature[parents] = split_feature[split]
        threshold[parents] = split_threshold[split]
        left[parents] = n_nodes + 2 * np.arange(len(parents))
        right[parents] = left[parents] + 1
        children = np.column_stack([left[parents], right[parents]]).ravel()
        n_nodes += len(children)

        moving = members[feature[node_of[members]] != LEAF]
        parent_of = node_of[moving]
        go_left = values[moving, feature[parent_of]] <= threshold[parent_of]
        node_of[moving] = np.where(go_left, left[parent_of], right[parent_of])
        sizes = np.bincount(node_of[moving], minlength=n_nodes)[children]
        ones = np.bincount(node_of[moving], weights=y[moving], minlength=n_nodes)[children].astype(np.int64)
        counts[children, 0] = sizes - ones
        counts[children, 1] = ones
        level = children
        depth += 1

    return Tree(
        feature=feature[:n_nodes].copy(),
        threshold=threshold[:n_nodes].copy(),
        left=left[:n_nodes].copy(),
        right=right[:n_nodes].copy(),
        counts=counts[:n_nodes].copy(),
    )


def _train_tree(matrix, labels, config, mtry, seed, index):
    stream = RandomStream(derive_seed(seed, index))
    n_rows = len(labels)
    rows = stream.integers(n_rows, n_rows)
    tree = grow_tree(matrix, labels, rows, config, mtry, stream)
    in_bag = np.zeros(n_rows, dtype=bool)
    in_bag[rows] = True
    return tree, rows, np.flatnonzero(~in_bag)


def train_forest(train: Dataset, config: ForestConfig, seed: int, n_jobs: int = 1) -> Forest:
    """
    Trains config.n_trees trees. Tree t draws its bootstrap and its feature subsets from
    the stream derive_seed(seed, t), so trees can be grown in any order or in parallel.
    """
    if not train.has_both_classes():
        raise DegenerateFoldError("degenerate training set: a single class is present")
    mtry = config.resolve_mtry(train.n_features)
    matrix, labels = train.features, train.labels
    if n_jobs == 1:
        grown = [_train_tree(matrix, labels, config, mtry, seed, index) for index in range(config.n_trees)]
    else:
        grown = Parallel(n_jobs=n_jobs, prefer='threads')(
            delayed(_train_tree)(matrix, labels, config, mtry, seed, index) for index in range(config.n_trees)
        )
    logger.debug("trained %d trees on %d rows under seed %d", config.n_trees, train.n_rows, seed)
    return Forest(
        trees=tuple(tree for tree, _, _ in grown),
        config=config,
        seed=seed,
        oob_indices=tuple(oob for _, _, oob in grown),
        feature_names=train.feature_names,
        bootstrap=tuple(rows for _, rows, _ in grown),
    )


def predict_votes(forest: Forest, matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != forest.n_features:
        raise DatasetError(f"expected rows of {forest.n_features} features, got shape {matrix.shape}")
    votes = np.zeros(len(matrix), dtype=np.int64)
    for tree in forest.trees:
        votes += tree.predict(matrix)
    return votes


def predict_many(forest: Forest, matrix: np.ndarray) -> np.ndarray:
    votes = predict_votes(forest, matrix)
    # an exact tie goes to class 0
    return (2 * votes > len(forest.trees)).astype(np.int64)


def predict(forest: Forest, row: Sequence[float]) -> int:
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or len(row) != forest.n_features:
        raise DatasetError(f"expected a row of {forest.n_features} features, got {len(np.atleast_1d(row))}")
    return int(predict_many(forest, row[None, :])[0])


def oob_accuracy(forest: Forest, train: Dataset) -> float:
    n_rows = train.n_rows
    votes = np.zeros(n_rows, dtype=np.int64)
    voters = np.zeros(n_rows, dtype=np.int64)
    for tree, oob in zip(forest.trees, forest.oob_indices):
        if len(oob) == 0:
            continue
        votes[oob] += tree.predict(train.features[oob])
        voters[oob] += 1
    covered = voters > 0
    if not covered.all():
        logger.warning("%d rows are never out-of-bag and are left out of the oob accuracy", int((~covered).sum()))
    if not covered.any():
        raise DatasetError("no row is out-of-bag for any tree")
    predicted = (2 * votes > voters).astype(np.int64)
    return float(np.mean(predicted[covered] == train.labels[covered]))


def mdi_importance(forest: Forest) -> ImportanceVector:
    """
    Mean decrease in gini: for every split, the node's share of the bootstrap sample times the
    impurity decrease it achieves, summed per feature and averaged over trees.
    """
    scores = np.zeros(forest.n_features, dtype=np.float64)
    for tree in forest.trees:
        internal = np.flatnonzero(tree.feature != LEAF)
        if internal.size == 0:
            continue
        counts = tree.counts.astype(np.float64)
        sizes = counts.sum(axis=1)
        impurity = 1.0 - ((counts / sizes[:, None]) ** 2).sum(axis=1)
        left, right = tree.left[internal], tree.right[internal]
        decrease = (sizes[internal] * impurity[internal]
                    - sizes[left] * impurity[left]
                    - sizes[right] * impurity[right]) / sizes[0]
        np.add.at(scores, tree.feature[internal], np.maximum(decrease, 0.0))
    return ImportanceVector(scores=scores / len(forest.trees), method=ImportanceMethod.MDI)


def oob_permutation_importance(forest: Forest, train: Dataset, seed: int) -> ImportanceVector:
    """
    Per feature: mean over trees of (oob accuracy - oob accuracy with the feature column permuted
    among that tree's oob rows). Features a tree never splits on leave its predictions unchanged and
    contribute a drop of exactly 0 for that tree.
    """
    n_features = forest.n_features
    drops = np.zeros(n_features, dtype=np.float64)
    used_trees = 0
    covered = np.zeros(train.n_rows, dtype=bool)
    for index, (tree, oob) in enumerate(zip(forest.trees, forest.oob_indices)):
        if len(oob) == 0:
            continue
        used_trees += 1
        covered[oob] = True
        split_features = np.unique(tree.feature[tree.feature != LEAF])
        if not split_features.size:
            continue
        oob_matrix = train.features[oob]
        oob_labels = train.labels[oob]
        base = np.mean(tree.predict(oob_matrix) == oob_labels)
        stream = RandomStream(derive_seed(seed, index, salt=PERMUTATION_SALT))
        # one block of oob rows per split feature, each with its own column permuted, predicted in one pass
        n_oob = len(oob)
        permuted = np.tile(oob_matrix, (len(split_features), 1))
        for block, feature in enumerate(split_features.tolist()):
            permuted[block * n_oob:(block + 1) * n_oob, feature] = oob_matrix[stream.permutation(n_oob), feature]
        hits = (tree.predict(permuted).reshape(-1, n_oob) == oob_labels).mean(axis=1)
        drops[split_features] += base - hits
    if not covered.all():
        logger.warning("%d rows are never out-of-bag and do not contribute to permutation importance",
                       int((~covered).sum()))
    if used_trees:
        drops /= used_trees
    return ImportanceVector(scores=drops, method=ImportanceMethod.OOB_PERMUTATION)


def importance(forest: Forest, train: Dataset, method, seed: int) -> ImportanceVector:
    method = ImportanceMethod(method)
    if method is ImportanceMethod.MDI:
        return mdi_importance(forest)
    return oob_permutation_importance(forest, train, seed)


def forest_to_json(forest: Forest) -> str:
    doc = {
        'seed': forest.seed,
        'config': forest.config.to_dict(),
        'feature_names': list(forest.feature_names),
        'trees': [tree.to_dict() for tree in forest.trees],
        'oob_indices': [oob.tolist() for oob in forest.oob_indices],
        'bootstrap': [rows.tolist() for rows in forest.bootstrap],
    }
    return json.dumps(doc, sort_keys=True, separators=(',', ':'))


def forest_from_json(text: str) -> Forest:
    doc = json.loads(text)
    config = doc['config']
    return Forest(
        trees=tuple(Tree.from_dict(tree) for tree in doc['trees']),
        config=ForestConfig(**config),
        seed=int(doc['seed']),
        oob_indices=tuple(np.asarray(oob, dtype=np.int64) for oob in doc['oob_indices']),
        feature_names=tuple(doc['feature_names']),
        bootstrap=tuple(np.asarray(rows, dtype=np.int64) for rows in doc.get('bootstrap', [])),
    )
