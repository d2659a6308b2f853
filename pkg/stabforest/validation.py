"""
This file contains the baseline validation schemes (80/20 holdout, k-fold, leave-one-subject-out,
leave-one-out) and the classification metrics they report
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from .constants import K_FOLDS, TEST_FRACTION, TOP_K
from .data import Dataset, split_train_test, subject_partition
from .errors import ConfigError, DatasetError, DegenerateFoldError
from .forest import (ForestConfig, ImportanceMethod, ImportanceVector, importance, mdi_importance, predict_many,
                     train_forest)
from .rng import derive_trial_seed, shuffle
from .trials import top_k_features
from .utils import Stopwatch

logger = logging.getLogger(__name__)


class Scheme(str, Enum):
    HOLDOUT_80_20 = 'holdout'
    KFOLD = 'kfold'
    LOSO = 'loso'
    LOOCV = 'loocv'


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: 'ConfusionMatrix') -> 'ConfusionMatrix':
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    @classmethod
    def from_predictions(cls, truth, predicted) -> 'ConfusionMatrix':
        truth = np.asarray(truth, dtype=np.int64)
        predicted = np.asarray(predicted, dtype=np.int64)
        return cls(
            tp=int(np.sum((truth == 1) & (predicted == 1))),
            fp=int(np.sum((truth == 0) & (predicted == 1))),
            tn=int(np.sum((truth == 0) & (predicted == 0))),
            fn=int(np.sum((truth == 1) & (predicted == 0))),
        )

    def to_dict(self) -> dict:
        return {'tp': self.tp, 'fp': self.fp, 'tn': self.tn, 'fn': self.fn}


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    balanced_accuracy: float
    # true when one class has no actual members and balanced accuracy uses the other term only
    partial: bool = False


def compute_metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise ValueError("metrics of an empty confusion matrix are undefined")
    accuracy = (cm.tp + cm.tn) / cm.total
    terms = []
    if cm.tp + cm.fn:
        terms.append(cm.tp / (cm.tp + cm.fn))
    if cm.tn + cm.fp:
        terms.append(cm.tn / (cm.tn + cm.fp))
    return Metrics(accuracy=accuracy, balanced_accuracy=sum(terms) / len(terms), partial=len(terms) < 2)


@dataclass(frozen=True, eq=False)
class FoldResult:
    fold_id: int
    seed: int
    confusion: ConfusionMatrix
    importance: ImportanceVector
    row_ids: np.ndarray
    predictions: np.ndarray
    flags: tuple = ()
    # mean decrease in gini of the same forest, reported next to the configured method
    mdi: Optional[ImportanceVector] = None

    def to_dict(self) -> dict:
        return {
            'fold_id': self.fold_id,
            'seed': self.seed,
            'confusion': self.confusion.to_dict(),
            'importance': self.importance.to_dict(),
            'mdi': self.mdi.to_dict() if self.mdi is not None else None,
            'flags': list(self.flags),
        }


@dataclass(eq=False)
class ValidationReport:
    scheme: Scheme
    seed: int
    accuracy: float
    balanced_accuracy: float
    per_fold: list
    wall_time_ms: float
    feature_names: tuple
    confusion: ConfusionMatrix
    predictions: dict
    mean_importance: np.ndarray
    top_features: list
    mean_mdi: Optional[np.ndarray] = None
    partial_metric: bool = False
    skipped_folds: int = 0
    warnings: list = field(default_factory=list)
    k: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            'scheme': self.scheme.value,
            'seed': self.seed,
            'k': self.k,
            'accuracy': self.accuracy,
            'balanced_accuracy': self.balanced_accuracy,
            'partial_metric': self.partial_metric,
            'confusion': self.confusion.to_dict(),
            'n_folds': len(self.per_fold),
            'skipped_folds': self.skipped_folds,
            'per_fold': [fold.to_dict() for fold in self.per_fold],
            'mean_importance': [float(score) for score in self.mean_importance],
            'top_features': list(self.top_features),
            'top_feature_names': [self.feature_names[index] for index in self.top_features],
            'mean_mdi': None if self.mean_mdi is None else [float(score) for score in self.mean_mdi],
            'predictions': [[int(row), int(label)] for row, label in sorted(self.predictions.items())],
            'warnings': list(self.warnings),
            'wall_time_ms': self.wall_time_ms,
        }


def _evaluate_fold(fold_id: int, train: Dataset, test: Dataset, cfg: ForestConfig, seed: int) -> FoldResult:
    flags = []
    if not test.has_both_classes():
        flags.append(f"fold {fold_id}: test rows hold a single class")
    forest = train_forest(train, cfg, seed)
    predicted = predict_many(forest, test.features)
    scores = importance(forest, train, cfg.importance_method, seed)
    return FoldResult(
        fold_id=fold_id,
        seed=seed,
        confusion=ConfusionMatrix.from_predictions(test.labels, predicted),
        importance=scores,
        row_ids=test.row_ids,
        predictions=predicted,
        flags=tuple(flags),
        mdi=scores if scores.method is ImportanceMethod.MDI else mdi_importance(forest),
    )


def _rows_fold_task(fold_id, dataset, train_rows, test_rows, cfg, seed):
    train = dataset.take(train_rows)
    if not train.has_both_classes():
        return fold_id, None
    return fold_id, _evaluate_fold(fold_id, train, dataset.take(test_rows), cfg, seed)


def _subject_fold_task(subject, dataset, cfg, seed):
    try:
        train, holdout = subject_partition(dataset, subject)
    except DegenerateFoldError:
        return subject, None
    return subject, _evaluate_fold(subject, train, holdout, cfg, seed)


def _assemble(scheme: Scheme, seed: int, dataset: Dataset, folds: list, skipped: list, wall_time_ms: float,
              top_k: int, k: Optional[int] = None, warnings: Optional[list] = None) -> ValidationReport:
    warnings = list(warnings or [])
    if not folds:
        raise DegenerateFoldError(f"every {scheme.value} fold was degenerate")
    folds = sorted(folds, key=lambda fold: fold.fold_id)
    confusion = ConfusionMatrix()
    predictions = {}
    for fold in folds:
        confusion = confusion + fold.confusion
        predictions.update(zip(fold.row_ids.tolist(), fold.predictions.tolist()))
        warnings.extend(fold.flags)
    for fold_id in skipped:
        warnings.append(f"fold {fold_id}: degenerate training set, skipped")
    for message in warnings:
        logger.warning(message)
    metrics = compute_metrics(confusion)
    mean_importance = np.mean([fold.importance.scores for fold in folds], axis=0)
    mean_mdi = np.mean([fold.mdi.scores for fold in folds], axis=0)
    top = top_k_features(ImportanceVector(mean_importance, folds[0].importance.method), min(top_k, dataset.n_features))
    return ValidationReport(
        scheme=scheme,
        seed=seed,
        accuracy=metrics.accuracy,
        balanced_accuracy=metrics.balanced_accuracy,
        partial_metric=metrics.partial,
        per_fold=folds,
        wall_time_ms=wall_time_ms,
        feature_names=dataset.feature_names,
        confusion=confusion,
        predictions=predictions,
        mean_importance=mean_importance,
        top_features=top,
        mean_mdi=mean_mdi,
        skipped_folds=len(skipped),
        warnings=warnings,
        k=k,
    )


def _run_tasks(task, arguments, n_jobs):
    """
    Runs fold tasks serially or with joblib; returns (results, skipped fold ids) in task order.
    """
    if n_jobs == 1:
        outcomes = [task(*args) for args in arguments]
    else:
        outcomes = Parallel(n_jobs=n_jobs)(delayed(task)(*args) for args in arguments)
    results = [result for _, result in outcomes if result is not None]
    skipped = [fold_id for fold_id, result in outcomes if result is None]
    return results, skipped


def holdout_validate(d: Dataset, cfg: ForestConfig, seed: int, test_fraction: float = TEST_FRACTION,
                     top_k: int = TOP_K) -> ValidationReport:
    with Stopwatch() as watch:
        train, test = split_train_test(d, test_fraction, seed)
        fold = _evaluate_fold(0, train, test, cfg, seed)
    return _assemble(Scheme.HOLDOUT_80_20, seed, d, [fold], [], watch.elapsed_ms, top_k)


def kfold_folds(n_rows: int, k: int, seed: int) -> list[np.ndarray]:
    """
    Seed-shuffled rows cut into k contiguous folds; the first n % k folds hold one extra row.
    """
    if k < 2 or k > n_rows:
        raise ConfigError(f"k must lie in [2, {n_rows}], got {k}")
    order = np.asarray(shuffle(n_rows, seed), dtype=np.int64)
    base, extra = divmod(n_rows, k)
    folds, start = [], 0
    for fold_id in range(k):
        size = base + (1 if fold_id < extra else 0)
        folds.append(np.sort(order[start:start + size]))
        start += size
    return folds


def kfold_validate(d: Dataset, cfg: ForestConfig, seed: int, k: int = K_FOLDS, top_k: int = TOP_K,
                   n_jobs: int = 1) -> ValidationReport:
    """
    k-fold cross validation. Each fold's forest is seeded with derive_trial_seed(seed, r, 0)
    where r is the fold's lowest held-out row, so k = n_rows reproduces leave-one-out seeding.
    """
    with Stopwatch() as watch:
        all_rows = np.arange(d.n_rows)
        arguments = []
        for fold_id, test_rows in enumerate(kfold_folds(d.n_rows, k, seed)):
            train_rows = np.setdiff1d(all_rows, test_rows, assume_unique=True)
            arguments.append((fold_id, d, train_rows, test_rows, cfg, derive_trial_seed(seed, int(test_rows[0]), 0)))
        results, skipped = _run_tasks(_rows_fold_task, arguments, n_jobs)
    return _assemble(Scheme.KFOLD, seed, d, results, skipped, watch.elapsed_ms, top_k, k=k)


def loso_validate(d: Dataset, cfg: ForestConfig, seed: int, top_k: int = TOP_K, n_jobs: int = 1,
                  scheme: Scheme = Scheme.LOSO) -> ValidationReport:
    """One fold per subject, the fold's forest seeded with derive_trial_seed(seed, subject, 0)."""
    if d.n_subjects < 2:
        raise DatasetError(f"leave-one-subject-out needs at least 2 subjects, got {d.n_subjects}")
    with Stopwatch() as watch:
        arguments = [(subject, d, cfg, derive_trial_seed(seed, subject, 0)) for subject in range(d.n_subjects)]
        results, skipped = _run_tasks(_subject_fold_task, arguments, n_jobs)
    return _assemble(scheme, seed, d, results, skipped, watch.elapsed_ms, top_k)


def loocv_validate(d: Dataset, cfg: ForestConfig, seed: int, top_k: int = TOP_K, n_jobs: int = 1) -> ValidationReport:
    return loso_validate(d.with_row_subjects(), cfg, seed, top_k=top_k, n_jobs=n_jobs, scheme=Scheme.LOOCV)


def run_scheme(scheme, d: Dataset, cfg: ForestConfig, seed: int, k: int = K_FOLDS,
               test_fraction: float = TEST_FRACTION, top_k: int = TOP_K, n_jobs: int = 1) -> ValidationReport:
    try:
        scheme = Scheme(scheme)
    except ValueError:
        raise ConfigError(f"unknown scheme {scheme!r}") from None
    if scheme is Scheme.HOLDOUT_80_20:
        return holdout_validate(d, cfg, seed, test_fraction=test_fraction, top_k=top_k)
    if scheme is Scheme.KFOLD:
        return kfold_validate(d, cfg, seed, k=k, top_k=top_k, n_jobs=n_jobs)
    if scheme is Scheme.LOSO:
        return loso_validate(d, cfg, seed, top_k=top_k, n_jobs=n_jobs)
    return loocv_validate(d, cfg, seed, top_k=top_k, n_jobs=n_jobs)
