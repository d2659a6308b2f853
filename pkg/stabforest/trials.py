"""
This file contains the randomized trials protocol.

For every subject, up to max_trials_per_subject forests are trained on all other subjects,
each under the seed derived from (master seed, subject, trial). A trial is correct when every
held-out row of the subject is predicted correctly; correct trials cast a ballot (the top-k
features of the forest's importance vector). Ballots are tallied per subject with a Borda count,
each subject's ranking becomes one ballot of the group tally, and the report records the first
trial after which the group top-k set no longer changes.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .constants import EARLY_STOP_WINDOW, MAX_TRIALS, TOP_K
from .data import Dataset, subject_partition
from .errors import ConfigError, DatasetError, NoBallotsError
from .forest import ForestConfig, ImportanceVector, importance, predict_many, train_forest
from .rng import derive_trial_seed, scan_seed_collisions
from .utils import Stopwatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrialsConfig:
    max_trials_per_subject: int = MAX_TRIALS
    top_k: int = TOP_K
    master_seed: int = 42
    early_stop_window: int = EARLY_STOP_WINDOW
    forest: ForestConfig = field(default_factory=ForestConfig)

    def __post_init__(self):
        if self.max_trials_per_subject < 1:
            raise ConfigError(f"max_trials_per_subject must be at least 1, got {self.max_trials_per_subject}")
        if self.top_k < 1:
            raise ConfigError(f"top_k must be at least 1, got {self.top_k}")
        if self.early_stop_window < 0:
            raise ConfigError(f"early_stop_window must be non-negative, got {self.early_stop_window}")

    def check_features(self, n_features: int):
        if self.top_k > n_features:
            raise ConfigError(f"top_k {self.top_k} exceeds the {n_features} available features")
        self.forest.resolve_mtry(n_features)

    def to_dict(self) -> dict:
        return {
            'max_trials_per_subject': self.max_trials_per_subject,
            'top_k': self.top_k,
            'master_seed': self.master_seed,
            'early_stop_window': self.early_stop_window,
            'forest': self.forest.to_dict(),
        }


@dataclass(frozen=True)
class TrialRecord:
    subject: int
    trial: int
    seed: int
    correct: bool
    # empty unless correct
    top_features: tuple = ()
    # predicted class of every held-out row of the subject
    predictions: tuple = ()


@dataclass(frozen=True, eq=False)
class VoteTally:
    borda: np.ndarray
    membership: np.ndarray
    n_ballots: int

    def to_dict(self, feature_names: Sequence[str]) -> dict:
        return {
            'n_ballots': self.n_ballots,
            'borda': {name: float(score) for name, score in zip(feature_names, self.borda)},
            'membership': {name: int(count) for name, count in zip(feature_names, self.membership)},
        }


@dataclass(frozen=True, eq=False)
class SubjectSummary:
    subject: int
    tally: VoteTally
    ranking: tuple
    trials_run: int
    trials_correct: int
    n_rows: int
    majority_correct_rows: int


@dataclass(eq=False)
class StabilityReport:
    config: TrialsConfig
    feature_names: tuple
    per_subject: dict
    group_tally: VoteTally
    group_ranking: list
    trial_accuracy: float
    majority_accuracy: float
    stability_iteration: Optional[int]
    never_correct_subjects: list
    set_frequencies: list
    agreement: dict
    seed_collisions: int = 0
    warnings: list = field(default_factory=list)
    wall_time_ms: float = 0.0
    records: list = field(default_factory=list)

    def names(self, ranking: Sequence[int]) -> list[str]:
        return [self.feature_names[index] for index in ranking]

    def to_dict(self, include_records: bool = False) -> dict:
        doc = {
            'config': self.config.to_dict(),
            'feature_names': list(self.feature_names),
            'trial_accuracy': self.trial_accuracy,
            'majority_accuracy': self.majority_accuracy,
            'stability_iteration': self.stability_iteration,
            'group_ranking': list(self.group_ranking),
            'group_ranking_names': self.names(self.group_ranking),
            'group_tally': self.group_tally.to_dict(self.feature_names),
            'never_correct_subjects': list(self.never_correct_subjects),
            'per_subject': [
                {
                    'subject': summary.subject,
                    'ranking': list(summary.ranking),
                    'ranking_names': self.names(summary.ranking),
                    'trials_run': summary.trials_run,
                    'trials_correct': summary.trials_correct,
                    'n_ballots': summary.tally.n_ballots,
                }
                for _, summary in sorted(self.per_subject.items())
            ],
            'set_frequencies': [
                {'features': list(members), 'names': self.names(members), 'count': count}
                for members, count in self.set_frequencies
            ],
            'agreement': dict(self.agreement),
            'seed_collisions': self.seed_collisions,
            'warnings': list(self.warnings),
            'wall_time_ms': self.wall_time_ms,
        }
        if include_records:
            doc['records'] = [
                {'subject': r.subject, 'trial': r.trial, 'seed': r.seed, 'correct': r.correct,
                 'top_features': list(r.top_features)}
                for r in self.records
            ]
        return doc


def top_k_features(imp: ImportanceVector, k: int) -> list[int]:
    scores = np.asarray(imp.scores, dtype=np.float64)
    if not 0 <= k <= len(scores):
        raise ConfigError(f"k {k} is outside [0, {len(scores)}]")
    return sorted(range(len(scores)), key=lambda feature: (-scores[feature], feature))[:k]


def tally_votes(ballots: Sequence[Sequence[int]], k: int, n_features: int) -> VoteTally:
    """
    Borda count: the feature at 1-based rank r of a ballot gains k - r + 1 points.
    membership counts the ballots a feature appears on.
    """
    borda = np.zeros(n_features, dtype=np.float64)
    membership = np.zeros(n_features, dtype=np.int64)
    for ballot in ballots:
        if len(ballot) > k or len(set(ballot)) != len(ballot):
            raise ValueError(f"a ballot holds at most {k} distinct features, got {list(ballot)}")
        for rank, feature in enumerate(ballot, start=1):
            borda[feature] += k - rank + 1
            membership[feature] += 1
    return VoteTally(borda=borda, membership=membership, n_ballots=len(ballots))


def _ranked(borda: np.ndarray, membership: np.ndarray, k: int) -> list[int]:
    present = [feature for feature in range(len(borda)) if membership[feature] > 0]
    present.sort(key=lambda feature: (-borda[feature], -membership[feature], feature))
    return present[:k]


def subject_ranking(tally: VoteTally, k: int) -> list[int]:
    if tally.n_ballots == 0:
        raise NoBallotsError("no correct trials for subject")
    return _ranked(tally.borda, tally.membership, k)


def group_ranking(per_subject: Mapping[int, Sequence[int]] | Sequence[Sequence[int]], k: int,
                  n_features: int) -> tuple[VoteTally, list[int]]:
    """Every subject's final ranking is one ballot of the group tally."""
    if isinstance(per_subject, Mapping):
        ballots = [list(per_subject[subject]) for subject in sorted(per_subject)]
    else:
        ballots = [list(ranking) for ranking in per_subject]
    ballots = [ballot for ballot in ballots if ballot]
    if not ballots:
        raise NoBallotsError("all subjects never-correct: no subject ranking to aggregate")
    tally = tally_votes(ballots, k, n_features)
    return tally, _ranked(tally.borda, tally.membership, k)


def run_subject_trials(d: Dataset, subject: int, cfg: TrialsConfig) -> list[TrialRecord]:
    """
    Repeated leave-one-subject-out trials for one subject. Stops early once the top-k set of the
    subject's running tally has stayed the same for early_stop_window consecutive correct trials.
    """
    train, holdout = subject_partition(d, subject)
    k = cfg.top_k
    borda = np.zeros(d.n_features, dtype=np.float64)
    membership = np.zeros(d.n_features, dtype=np.int64)
    current_set = None
    unchanged = 0
    records = []
    for trial in range(cfg.max_trials_per_subject):
        seed = derive_trial_seed(cfg.master_seed, subject, trial)
        forest = train_forest(train, cfg.forest, seed)
        predicted = predict_many(forest, holdout.features)
        correct = bool(np.all(predicted == holdout.labels))
        top = ()
        if correct:
            top = tuple(top_k_features(importance(forest, train, cfg.forest.importance_method, seed), k))
            for rank, feature in enumerate(top, start=1):
                borda[feature] += k - rank + 1
                membership[feature] += 1
        records.append(TrialRecord(subject, trial, seed, correct, top, tuple(predicted.tolist())))
        if not correct or cfg.early_stop_window == 0:
            continue
        running_set = frozenset(_ranked(borda, membership, k))
        unchanged = unchanged + 1 if running_set == current_set else 0
        current_set = running_set
        if unchanged >= cfg.early_stop_window:
            logger.info("subject %d: top-%d set stable for %d correct trials, stopping after trial %d",
                        subject, k, cfg.early_stop_window, trial)
            break
    return records


def _group_set(rankings: Mapping[int, Sequence[int]], k: int, n_features: int) -> Optional[frozenset]:
    ballots = [ranking for ranking in rankings.values() if ranking]
    if not ballots:
        return None
    tally = tally_votes(ballots, k, n_features)
    return frozenset(_ranked(tally.borda, tally.membership, k))


def stability_iteration(records: Sequence[TrialRecord], k: int, n_features: int) -> Optional[int]:
    """
    Smallest trial index T such that for every t >= T the group top-k set built from the correct
    records with trial <= t equals the final group set. None when the final set only appears at the
    last trial of a multi-trial run.
    """
    if not records:
        return None
    ordered = sorted(records, key=lambda record: (record.trial, record.subject))
    last_trial = ordered[-1].trial
    borda = {}
    membership = {}
    rankings = {}
    sets = []
    position = 0
    for trial in range(last_trial + 1):
        touched = set()
        while position < len(ordered) and ordered[position].trial == trial:
            record = ordered[position]
            position += 1
            if not record.correct:
                continue
            subject = record.subject
            if subject not in borda:
                borda[subject] = np.zeros(n_features, dtype=np.float64)
                membership[subject] = np.zeros(n_features, dtype=np.int64)
            for rank, feature in enumerate(record.top_features, start=1):
                borda[subject][feature] += k - rank + 1
                membership[subject][feature] += 1
            touched.add(subject)
        for subject in touched:
            rankings[subject] = _ranked(borda[subject], membership[subject], k)
        sets.append(_group_set(rankings, k, n_features))
    final = sets[-1]
    stable_from = last_trial
    while stable_from > 0 and sets[stable_from - 1] == final:
        stable_from -= 1
    if stable_from == last_trial and last_trial > 0:
        return None
    return stable_from


def set_frequencies(records: Sequence[TrialRecord]) -> list[tuple[tuple, int]]:
    """Counts of whole top-k sets over correct records, most frequent first."""
    counts = Counter(frozenset(record.top_features) for record in records if record.correct)
    return sorted(((tuple(sorted(members)), count) for members, count in counts.items()),
                  key=lambda item: (-item[1], item[0]))


def _jaccard(a, b) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def subject_group_agreement(per_subject: Mapping[int, SubjectSummary], group: Sequence[int]) -> dict:
    """Jaccard between each ranked subject's top-k set and the group set."""
    scores = {subject: _jaccard(summary.ranking, group)
              for subject, summary in sorted(per_subject.items()) if summary.ranking}
    return {
        'mean_jaccard': float(np.mean(list(scores.values()))) if scores else None,
        'subjects_matching_group': sum(1 for score in scores.values() if score == 1.0),
        'subjects_ranked': len(scores),
    }


def summarize(d: Dataset, records: Sequence[TrialRecord], cfg: TrialsConfig, wall_time_ms: float = 0.0,
              seed_collisions: int = 0) -> StabilityReport:
    """Builds the StabilityReport from the records of a completed run, in (subject, trial) order."""
    records = sorted(records, key=lambda record: (record.subject, record.trial))
    k = cfg.top_k
    by_subject = {}
    for record in records:
        by_subject.setdefault(record.subject, []).append(record)

    per_subject = {}
    never_correct = []
    majority_correct = 0
    for subject, subject_records in sorted(by_subject.items()):
        ballots = [record.top_features for record in subject_records if record.correct]
        tally = tally_votes(ballots, k, d.n_features)
        ranking = tuple(subject_ranking(tally, k)) if ballots else ()
        if not ballots:
            never_correct.append(subject)
        truth = d.labels[d.subject_rows(subject)]
        votes = np.sum([record.predictions for record in subject_records], axis=0)
        # majority over trials, ties go to class 0
        majority = (2 * votes > len(subject_records)).astype(np.int64)
        correct_rows = int(np.sum(majority == truth))
        majority_correct += correct_rows
        per_subject[subject] = SubjectSummary(
            subject=subject,
            tally=tally,
            ranking=ranking,
            trials_run=len(subject_records),
            trials_correct=len(ballots),
            n_rows=len(truth),
            majority_correct_rows=correct_rows,
        )

    group_tally, ranking = group_ranking({s: summary.ranking for s, summary in per_subject.items()}, k, d.n_features)
    total_run = sum(summary.trials_run for summary in per_subject.values())
    total_correct = sum(summary.trials_correct for summary in per_subject.values())
    total_rows = sum(summary.n_rows for summary in per_subject.values())
    warnings = []
    if never_correct:
        warnings.append(f"{len(never_correct)} subjects were never predicted correctly and cast no ballot")
    return StabilityReport(
        config=cfg,
        feature_names=d.feature_names,
        per_subject=per_subject,
        group_tally=group_tally,
        group_ranking=ranking,
        trial_accuracy=total_correct / total_run,
        majority_accuracy=majority_correct / total_rows,
        stability_iteration=stability_iteration(records, k, d.n_features),
        never_correct_subjects=never_correct,
        set_frequencies=set_frequencies(records),
        agreement=subject_group_agreement(per_subject, ranking),
        seed_collisions=seed_collisions,
        warnings=warnings,
        wall_time_ms=wall_time_ms,
        records=list(records),
    )


def _collect(d: Dataset, cfg: TrialsConfig, n_jobs: int) -> tuple[list[TrialRecord], int]:
    if d.n_subjects < 2:
        raise DatasetError(f"randomized trials need at least 2 subjects, got {d.n_subjects}")
    cfg.check_features(d.n_features)
    collisions = scan_seed_collisions(cfg.master_seed, d.n_subjects, cfg.max_trials_per_subject)
    if collisions:
        logger.warning("%d (subject, trial) cells share a derived seed under master seed %d",
                       len(collisions), cfg.master_seed)
    else:
        logger.info("derived seeds are distinct over %d subjects x %d trials",
                    d.n_subjects, cfg.max_trials_per_subject)
    subjects = range(d.n_subjects)
    if n_jobs == 1:
        batches = [run_subject_trials(d, subject, cfg) for subject in subjects]
    else:
        batches = Parallel(n_jobs=n_jobs)(delayed(run_subject_trials)(d, subject, cfg) for subject in subjects)
    records = [record for batch in batches for record in batch]
    records.sort(key=lambda record: (record.subject, record.trial))
    return records, len(collisions)


def run_randomized_trials(d: Dataset, cfg: TrialsConfig, n_jobs: int = 1) -> StabilityReport:
    with Stopwatch() as watch:
        records, collisions = _collect(d, cfg, n_jobs)
        report = summarize(d, records, cfg, seed_collisions=collisions)
    report.wall_time_ms = watch.elapsed_ms
    logger.info("randomized trials: trial accuracy %.4f, group ranking %s", report.trial_accuracy,
                report.names(report.group_ranking))
    return report


@dataclass(frozen=True)
class SweepRow:
    max_trials: int
    trial_accuracy: float
    majority_accuracy: float
    group_ranking: tuple
    group_ranking_names: tuple
    stability_iteration: Optional[int]

    def to_dict(self) -> dict:
        return {
            'max_trials': self.max_trials,
            'trial_accuracy': self.trial_accuracy,
            'majority_accuracy': self.majority_accuracy,
            'group_ranking': list(self.group_ranking),
            'group_ranking_names': list(self.group_ranking_names),
            'stability_iteration': self.stability_iteration,
        }


def sweep_trial_counts(d: Dataset, cfg: TrialsConfig, counts: Sequence[int], n_jobs: int = 1) -> list[SweepRow]:
    """
    Explores trial budgets with one run at the largest budget (early stopping disabled):
    trial seeds do not depend on the budget, so a smaller budget is a prefix of that run.
    """
    counts = sorted(set(int(count) for count in counts))
    if not counts or counts[0] < 1:
        raise ConfigError("trial counts must be positive")
    full = replace(cfg, max_trials_per_subject=counts[-1], early_stop_window=0)
    records, collisions = _collect(d, full, n_jobs)
    rows = []
    for count in counts:
        prefix = [record for record in records if record.trial < count]
        report = summarize(d, prefix, replace(full, max_trials_per_subject=count), seed_collisions=collisions)
        rows.append(SweepRow(
            max_trials=count,
            trial_accuracy=report.trial_accuracy,
            majority_accuracy=report.majority_accuracy,
            group_ranking=tuple(report.group_ranking),
            group_ranking_names=tuple(report.names(report.group_ranking)),
            stability_iteration=report.stability_iteration,
        ))
    return rows
