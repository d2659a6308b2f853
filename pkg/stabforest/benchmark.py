"""
This file contains the timing harness behind the benchmark command.
Every validation scheme (and optionally the randomized trials protocol) is timed on seed-shuffled
subsamples of a dataset. Dataset loading is outside the timed region.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .constants import BENCHMARK_TRIALS, K_FOLDS, TEST_FRACTION, TOP_K
from .data import Dataset, subsample
from .errors import ConfigError
from .forest import ForestConfig
from .trials import TrialsConfig, run_randomized_trials
from .validation import Scheme, run_scheme

logger = logging.getLogger(__name__)

TRIALS_SCHEME = 'trials'
# name of the estimated cost of repeating plain LOSO once per trial
REPEATED_LOSO_SCHEME = 'loso_x{n}'


@dataclass(frozen=True)
class BenchmarkRow:
    dataset: str
    sample_size: int
    scheme: str
    wall_time_ms: float
    accuracy: float
    # true for rows derived from another row's timing rather than measured
    estimated: bool = False

    def __post_init__(self):
        if self.wall_time_ms <= 0:
            raise ValueError(f"wall_time_ms must be positive, got {self.wall_time_ms}")

    def to_dict(self) -> dict:
        return {
            'dataset': self.dataset,
            'sample_size': self.sample_size,
            'scheme': self.scheme,
            'wall_time_ms': self.wall_time_ms,
            'accuracy': self.accuracy,
        }


def _scheme_names(schemes: Sequence[str]) -> list[str]:
    names = []
    for scheme in schemes:
        if scheme != TRIALS_SCHEME:
            try:
                scheme = Scheme(scheme).value
            except ValueError:
                raise ConfigError(f"unknown scheme {scheme!r}") from None
        if scheme not in names:
            names.append(scheme)
    return names


def run_benchmark(d: Dataset, forest_cfg: ForestConfig, sizes: Sequence[int], schemes: Sequence[str], seed: int,
                  k: int = K_FOLDS, test_fraction: float = TEST_FRACTION, top_k: int = TOP_K,
                  trials_cfg: Optional[TrialsConfig] = None, benchmark_trials: int = BENCHMARK_TRIALS,
                  n_jobs: int = 1) -> list[BenchmarkRow]:
    """
    Input: dataset, forest configuration, subsample sizes and scheme names ('trials' for the protocol)
    Returns one measured row per (size, scheme), sizes ascending. When LOSO is timed, an extra
    estimated row scales its wall time by benchmark_trials, the cost of repeating plain LOSO once per trial.
    Sizes larger than the dataset are skipped with a warning.
    """
    names = _scheme_names(schemes)
    if benchmark_trials < 1:
        raise ConfigError(f"benchmark trials must be at least 1, got {benchmark_trials}")
    usable = sorted(set(int(size) for size in sizes if 0 < int(size) <= d.n_rows))
    for size in sorted(set(sizes) - set(usable)):
        logger.warning("sample size %s is outside [1, %d], skipped", size, d.n_rows)
    if trials_cfg is None:
        trials_cfg = TrialsConfig(master_seed=seed, top_k=top_k, forest=forest_cfg)
    rows = []
    for size in usable:
        sample = subsample(d, size, seed)
        for name in names:
            logger.info("benchmark: %s at n=%d", name, size)
            if name == TRIALS_SCHEME:
                report = run_randomized_trials(sample, replace(trials_cfg, forest=forest_cfg), n_jobs=n_jobs)
                rows.append(BenchmarkRow(d.name, size, name, report.wall_time_ms, report.trial_accuracy))
                continue
            report = run_scheme(name, sample, forest_cfg, seed, k=min(k, size), test_fraction=test_fraction,
                                top_k=top_k, n_jobs=n_jobs)
            rows.append(BenchmarkRow(d.name, size, name, report.wall_time_ms, report.accuracy))
            if name == Scheme.LOSO.value:
                rows.append(BenchmarkRow(d.name, size, REPEATED_LOSO_SCHEME.format(n=benchmark_trials),
                                         report.wall_time_ms * benchmark_trials, report.accuracy, estimated=True))
    return rows


def benchmark_table(rows: Sequence[BenchmarkRow]) -> list[dict]:
    """One row per sample size, one wall time column per scheme, in first-seen scheme order."""
    schemes = []
    table = {}
    for row in rows:
        if row.scheme not in schemes:
            schemes.append(row.scheme)
        table.setdefault(row.sample_size, {'sample_size': row.sample_size})[row.scheme] = row.wall_time_ms
    return [{column: table[size].get(column) for column in ['sample_size'] + schemes} for size in sorted(table)]
