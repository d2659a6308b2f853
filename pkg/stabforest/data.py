"""
This file contains the dataset type, the CSV loader and the row partitioning helpers
(train/test split, leave-one-subject-out folds, subsampling) plus the planted-feature generator
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .config import parse_kv_file
from .constants import NA_TOKENS
from .errors import ConfigError, DatasetError, DegenerateFoldError
from .rng import RandomStream, shuffle

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetProfile:
    n_rows: int
    n_features: int
    n_ordinals: int
    total_cardinality: int
    n_dropped_rows: int

    def to_dict(self) -> dict:
        return {
            'n_rows': self.n_rows,
            'n_features': self.n_features,
            'n_ordinals': self.n_ordinals,
            'total_cardinality': self.total_cardinality,
            'n_dropped_rows': self.n_dropped_rows,
        }


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Numeric feature matrix with binary labels and a subject index per row.
    The arrays are made read-only on construction so a Dataset can be shared between workers.
    """
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple
    subject_ids: np.ndarray
    n_subjects: int
    label_column: str = 'label'
    subject_column: Optional[str] = None
    label_values: tuple = ('0', '1')
    name: str = 'dataset'
    # original row index of every row, used to pool predictions across folds
    row_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        subject_ids = np.array(self.subject_ids, dtype=np.int64)
        row_ids = np.arange(len(labels), dtype=np.int64) if self.row_ids is None else np.array(self.row_ids, dtype=np.int64)
        if features.ndim != 2:
            raise DatasetError("features must be a 2 dimensional matrix")
        n_rows, n_features = features.shape
        if len(labels) != n_rows or len(subject_ids) != n_rows or len(row_ids) != n_rows:
            raise DatasetError("features, labels, subject ids and row ids must have the same number of rows")
        if len(self.feature_names) != n_features:
            raise DatasetError(f"{len(self.feature_names)} feature names for {n_features} feature columns")
        if len(set(self.feature_names)) != n_features:
            raise DatasetError("duplicate feature names")
        if n_features < 2:
            raise DatasetError(f"at least 2 features are required, got {n_features}")
        if not np.all(np.isfinite(features)):
            raise DatasetError("features contain missing or non finite values")
        if np.any((labels != 0) & (labels != 1)):
            raise DatasetError("labels must be 0 or 1")
        if n_rows and (subject_ids.min() < 0 or subject_ids.max() >= self.n_subjects):
            raise DatasetError("subject ids must lie in [0, n_subjects)")
        if len(np.unique(subject_ids)) != self.n_subjects:
            raise DatasetError("every subject must own at least one row")
        for array in (features, labels, subject_ids, row_ids):
            array.setflags(write=False)
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'subject_ids', subject_ids)
        object.__setattr__(self, 'row_ids', row_ids)
        object.__setattr__(self, 'feature_names', tuple(self.feature_names))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def has_both_classes(self) -> bool:
        return len(np.unique(self.labels)) == 2

    def subject_rows(self, subject: int) -> np.ndarray:
        return np.flatnonzero(self.subject_ids == subject)

    def take(self, rows) -> 'Dataset':
        """
        Returns the rows (in the given order) as a new Dataset.
        Subject ids are renumbered densely, keeping the relative order of the original ids.
        """
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size:
            _, dense = np.unique(self.subject_ids[rows], return_inverse=True)
            dense = dense.reshape(-1)
            n_subjects = int(dense.max()) + 1
        else:
            dense, n_subjects = np.zeros(0, dtype=np.int64), 0
        return Dataset(
            features=self.features[rows],
            labels=self.labels[rows],
            feature_names=self.feature_names,
            subject_ids=dense,
            n_subjects=n_subjects,
            label_column=self.label_column,
            subject_column=self.subject_column,
            label_values=self.label_values,
            name=self.name,
            row_ids=self.row_ids[rows],
        )

    def with_row_subjects(self) -> 'Dataset':
        """The same rows with the default mapping: every row is its own subject."""
        return Dataset(
            features=self.features,
            labels=self.labels,
            feature_names=self.feature_names,
            subject_ids=np.arange(self.n_rows),
            n_subjects=self.n_rows,
            label_column=self.label_column,
            subject_column=None,
            label_values=self.label_values,
            name=self.name,
            row_ids=self.row_ids,
        )


@dataclass(frozen=True)
class DatasetManifest:
    label_column: Optional[str] = None
    subject_column: Optional[str] = None
    ordinal_spec: Mapping[str, Sequence[str]] = field(default_factory=dict)
    na_tokens: tuple = NA_TOKENS


def dataset_manifest(values: Mapping[str, str]) -> DatasetManifest:
    """
    Picks the dataset keys out of parsed key-value settings:
        label = class
        subject = patient_id
        ordinal.grade = low,medium,high
        na = ,NA,?
    Other keys (run flags) are left to the command line configuration.
    """
    ordinal_spec = {
        key.split('.', 1)[1]: [item.strip() for item in value.split(',')]
        for key, value in values.items() if key.startswith('ordinal.')
    }
    na_tokens = tuple(token.strip() for token in values['na'].split(',')) if 'na' in values else NA_TOKENS
    return DatasetManifest(
        label_column=values.get('label') or None,
        subject_column=values.get('subject') or None,
        ordinal_spec=ordinal_spec,
        na_tokens=na_tokens,
    )


def load_manifest(path) -> DatasetManifest:
    manifest = dataset_manifest(parse_kv_file(path))
    if manifest.label_column is None:
        raise ConfigError(f"manifest {path} does not name a label column")
    return manifest


def _read_csv(path: Path, **options) -> pd.DataFrame:
    try:
        return pd.read_csv(path, encoding='utf-8', **options)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"{path} has no header row") from None
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot parse {path}: {exc}") from None


def _read_header(path: Path) -> list[str]:
    header = _read_csv(path, header=None, nrows=1, dtype=str, keep_default_na=False)
    if header.empty:
        raise DatasetError(f"{path} has no header row")
    return [str(name).strip() for name in header.iloc[0].tolist()]


def _as_float(column: pd.Series) -> Optional[np.ndarray]:
    """Exact float64 parse of a text column, None when any cell is not a finite number."""
    try:
        values = column.astype(np.float64).to_numpy()
    except (TypeError, ValueError):
        return None
    return values if np.isfinite(values).all() else None


def load_csv(path, label_column: str, subject_column: Optional[str] = None,
             ordinal_spec: Optional[Mapping[str, Sequence[str]]] = None,
             na_tokens: Sequence[str] = NA_TOKENS) -> tuple[Dataset, DatasetProfile]:
    """
    Loads a comma separated file with a header row.
    Rows holding a missing cell are dropped, categorical columns are integer encoded
    (ordinal_spec order when given, lexicographic otherwise) and the two label values are
    mapped to 0 and 1 in lexicographic order.
    """
    path = Path(path)
    ordinal_spec = dict(ordinal_spec or {})
    header = _read_header(path)
    if len(set(header)) != len(header):
        raise DatasetError(f"duplicate feature names in {path}")
    if label_column not in header:
        raise DatasetError(f"missing label column {label_column!r} in {path}")
    if subject_column is not None and subject_column not in header:
        raise DatasetError(f"missing subject column {subject_column!r} in {path}")
    for column in ordinal_spec:
        if column not in header:
            raise ConfigError(f"ordinal column {column!r} is not in {path}")

    frame = _read_csv(path, dtype=str, keep_default_na=False, na_values=list(na_tokens), skipinitialspace=True)
    if len(frame.columns) != len(header):
        raise DatasetError(f"{path}: rows hold {len(frame.columns)} cells but the header names {len(header)}")
    frame.columns = header
    frame = frame.apply(lambda column: column.str.strip())
    frame = frame.replace({token: np.nan for token in na_tokens})
    complete = frame.notna().all(axis=1)
    n_dropped = int((~complete).sum())
    if n_dropped:
        logger.warning("dropped %d rows with missing values from %s", n_dropped, path)
    frame = frame.loc[complete].reset_index(drop=True)
    if frame.empty:
        raise DatasetError(f"{path} is empty after dropping incomplete rows")

    raw_labels = frame[label_column]
    label_values = sorted(raw_labels.unique().tolist())
    if len(label_values) != 2:
        raise DatasetError(f"label not binary: column {label_column!r} has {len(label_values)} distinct values")
    labels = (raw_labels == label_values[-1]).astype(np.int64).to_numpy()

    if subject_column is not None:
        subject_ids, uniques = pd.factorize(frame[subject_column], sort=False)
        n_subjects = len(uniques)
    else:
        subject_ids = np.arange(len(frame))
        n_subjects = len(frame)

    feature_names = [name for name in header if name not in (label_column, subject_column)]
    columns = []
    n_ordinals = 0
    total_cardinality = 0
    for name in feature_names:
        column = frame[name]
        numeric = None if name in ordinal_spec else _as_float(column)
        if numeric is not None:
            columns.append(numeric)
            continue
        if name in ordinal_spec:
            order = list(ordinal_spec[name])
            unknown = sorted(set(column) - set(order))
            if unknown:
                raise DatasetError(f"column {name!r} holds values outside its ordinal order: {unknown}")
            codes = column.map({value: rank for rank, value in enumerate(order)})
            n_ordinals += 1
            total_cardinality += column.nunique()
        else:
            order = sorted(column.unique().tolist())
            codes = column.map({value: rank for rank, value in enumerate(order)})
            n_ordinals += 1
            total_cardinality += len(order)
        columns.append(codes.to_numpy(dtype=np.float64))

    dataset = Dataset(
        features=np.column_stack(columns) if columns else np.zeros((len(frame), 0)),
        labels=labels,
        feature_names=tuple(feature_names),
        subject_ids=subject_ids,
        n_subjects=n_subjects,
        label_column=label_column,
        subject_column=subject_column,
        label_values=tuple(label_values),
        name=path.stem,
    )
    profile = DatasetProfile(
        n_rows=dataset.n_rows,
        n_features=dataset.n_features,
        n_ordinals=n_ordinals,
        total_cardinality=int(total_cardinality),
        n_dropped_rows=n_dropped,
    )
    logger.info("loaded %s: %d rows, %d features, %d subjects", path, dataset.n_rows, dataset.n_features, dataset.n_subjects)
    return dataset, profile


def write_csv(dataset: Dataset, path) -> None:
    """Writes the encoded dataset so that load_csv reads back the same matrix and labels."""
    frame = pd.DataFrame(dataset.features, columns=list(dataset.feature_names))
    frame[dataset.label_column] = dataset.labels
    if dataset.subject_column is not None:
        frame[dataset.subject_column] = dataset.subject_ids
    frame.to_csv(path, index=False)


def profile(dataset: Dataset) -> DatasetProfile:
    return DatasetProfile(dataset.n_rows, dataset.n_features, 0, 0, 0)


def _require_both_classes(dataset: Dataset):
    if not dataset.has_both_classes():
        raise DatasetError("both classes must be present")


def split_train_test(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"fraction out of range: {test_fraction}")
    _require_both_classes(dataset)
    n_test = int(math.floor(test_fraction * dataset.n_rows + 0.5))
    if n_test == 0 or n_test == dataset.n_rows:
        raise ConfigError(f"test fraction {test_fraction} leaves an empty side on {dataset.n_rows} rows")
    order = shuffle(dataset.n_rows, seed)
    test_rows = np.sort(np.asarray(order[:n_test]))
    train_rows = np.sort(np.asarray(order[n_test:]))
    test = dataset.take(test_rows)
    if not test.has_both_classes():
        logger.warning("test split under seed %d holds a single class", seed)
    return dataset.take(train_rows), test


def subject_partition(dataset: Dataset, subject: int) -> tuple[Dataset, Dataset]:
    if not 0 <= subject < dataset.n_subjects:
        raise DatasetError(f"subject {subject} is outside [0, {dataset.n_subjects})")
    mask = dataset.subject_ids == subject
    train = dataset.take(np.flatnonzero(~mask))
    if not train.has_both_classes():
        raise DegenerateFoldError(f"degenerate LOSO fold: training set without subject {subject} holds a single class")
    return train, dataset.take(np.flatnonzero(mask))


def subsample(dataset: Dataset, n: int, seed: int) -> Dataset:
    if not 1 <= n <= dataset.n_rows:
        raise ConfigError(f"cannot subsample {n} rows from {dataset.n_rows}")
    rows = np.sort(np.asarray(shuffle(dataset.n_rows, seed)[:n]))
    sample = dataset.take(rows)
    # subsampled rows are renumbered so fold bookkeeping starts at row 0
    return Dataset(
        features=sample.features,
        labels=sample.labels,
        feature_names=sample.feature_names,
        subject_ids=sample.subject_ids,
        n_subjects=sample.n_subjects,
        label_column=sample.label_column,
        subject_column=sample.subject_column,
        label_values=sample.label_values,
        name=f"{dataset.name}_{n}",
    )


def make_planted_dataset(n_rows: int = 200, n_informative: int = 5, n_noise: int = 15,
                         margin: float = 1.0, seed: int = 0, n_subjects: Optional[int] = None) -> Dataset:
    """
    Synthetic dataset where only the first n_informative columns carry class signal.
    Informative column j is label * margin + N(0, 1), noise columns are N(0, 1).
    With n_subjects, rows are dealt to subjects round robin.
    """
    if n_informative < 0 or n_noise < 0 or n_informative + n_noise < 2:
        raise ConfigError("a planted dataset needs at least 2 features")
    if n_rows < 2:
        raise ConfigError("a planted dataset needs at least 2 rows")
    stream = RandomStream(seed)
    labels = np.zeros(n_rows, dtype=np.int64)
    labels[n_rows // 2:] = 1
    labels = labels[stream.permutation(n_rows)]
    n_features = n_informative + n_noise
    features = stream.normals(n_rows * n_features).reshape(n_rows, n_features)
    features[:, :n_informative] += margin * labels[:, None]
    names = [f"inf_{i}" for i in range(n_informative)] + [f"noise_{i}" for i in range(n_noise)]
    if n_subjects is None:
        subject_ids, n_subjects_used, subject_column = np.arange(n_rows), n_rows, None
    else:
        if not 1 <= n_subjects <= n_rows:
            raise ConfigError(f"cannot deal {n_rows} rows to {n_subjects} subjects")
        subject_ids, n_subjects_used, subject_column = np.arange(n_rows) % n_subjects, n_subjects, 'subject'
    return Dataset(
        features=features,
        labels=labels,
        feature_names=tuple(names),
        subject_ids=subject_ids,
        n_subjects=n_subjects_used,
        subject_column=subject_column,
        name='planted',
    )
