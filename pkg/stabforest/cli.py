"""
This file contains the command line of stabforest.

    stabforest <command> --data <csv> --label <column> [--manifest <file>] --out <dir> [flags]

Commands: validate, trials, compare, benchmark, stats, plot, sweep.
Settings are resolved flag first, then manifest, then the defaults of constants.py.
A failing command leaves error.json in the output directory and exits with code 1.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .benchmark import TRIALS_SCHEME, benchmark_table, run_benchmark
from .config import parse_bool, parse_kv_file
from .constants import (BENCHMARK_FILE, BENCHMARK_SIZES, BENCHMARK_TABLE_FILE, BENCHMARK_TRIALS,
                        COMPARE_PLOT_FILE, DEFAULT_SCHEME, DEFAULT_SEEDS, EARLY_STOP_WINDOW,
                        FEATURE_SPEARMAN_FILE, GROUP_PLOT_FILE, IMPORTANCE_METHOD, K_FOLDS, LOG_FORMAT,
                        MAX_TRIALS, MIN_NODE_SIZE, N_TREES, NA_TOKENS, PLOT_FILE, RANKINGS_FILE, REPORT_FILE,
                        SCHEMES, SWEEP_FILE, SWEEP_TRIALS, TALLY_FILE, TEST_FRACTION, TOP_K, WELCH_FILE)
from .data import Dataset, DatasetProfile, dataset_manifest, load_csv
from .errors import ConfigError, StabForestError, StatsError
from .forest import ForestConfig, ImportanceMethod, ImportanceVector
from .plots import render_svg_bars, render_svg_grid
from .report import write_error, write_json, write_table, write_text
from .stats import (compare_rankings, feature_class_spearman, read_ranking_csv, set_jaccard, spearman_rho,
                    welch_table)
from .trials import TrialsConfig, run_randomized_trials, sweep_trial_counts, top_k_features
from .utils import parse_int_list, parse_seed, worker_count
from .validation import Scheme, run_scheme

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    out: Path
    data: Optional[Path] = None
    label: Optional[str] = None
    subject: Optional[str] = None
    ordinal_spec: dict = field(default_factory=dict)
    na_tokens: tuple = NA_TOKENS
    scheme: str = DEFAULT_SCHEME
    schemes: tuple = SCHEMES
    seeds: tuple = DEFAULT_SEEDS
    forest: ForestConfig = field(default_factory=ForestConfig)
    trials: TrialsConfig = field(default_factory=TrialsConfig)
    k: int = K_FOLDS
    test_fraction: float = TEST_FRACTION
    top_k: int = TOP_K
    sizes: tuple = BENCHMARK_SIZES
    counts: tuple = SWEEP_TRIALS
    benchmark_trials: int = BENCHMARK_TRIALS
    with_trials: bool = False
    title: Optional[str] = None
    threads: int = -1
    verbose: bool = False

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")

    def to_dict(self) -> dict:
        # paths and worker count stay out of the reports so reruns compare byte for byte
        return {
            'label': self.label,
            'subject': self.subject,
            'scheme': self.scheme,
            'schemes': list(self.schemes),
            'seeds': list(self.seeds),
            'forest': self.forest.to_dict(),
            'trials': self.trials.to_dict(),
            'k': self.k,
            'test_fraction': self.test_fraction,
            'top_k': self.top_k,
        }

    def trials_for(self, seed: int) -> TrialsConfig:
        return replace(self.trials, master_seed=seed)


def _optional_int(text) -> Optional[int]:
    if text is None or str(text).strip().lower() in ('', 'none'):
        return None
    return int(text)


def _names(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(part.strip() for part in str(text).split(',') if part.strip())


def _tokens(text) -> tuple:
    # empty tokens are meaningful here: an empty cell is missing
    return tuple(token.strip() for token in str(text).split(','))


def _seeds(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(parse_seed(seed) for seed in text)
    return tuple(parse_seed(part) for part in str(text).split(',') if part.strip())


class _Settings:
    """Looks a key up in the parsed flags, then in the manifest values, then falls back to a default."""

    def __init__(self, args: argparse.Namespace, values: dict):
        self.args = args
        self.values = values

    def get(self, key: str, parse: Callable, default):
        flag = self.flag(key, None)
        if flag is not None:
            return flag
        if key in self.values:
            try:
                return parse(self.values[key])
            except (TypeError, ValueError) as error:
                raise ConfigError(f"invalid value {self.values[key]!r} for {key}: {error}") from None
        return default

    def flag(self, key: str, default):
        value = getattr(self.args, key.replace('-', '_'), None)
        return default if value is None else value


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = parse_kv_file(args.manifest) if getattr(args, 'manifest', None) else {}
    settings = _Settings(args, values)
    manifest = dataset_manifest(values)
    forest = ForestConfig(
        n_trees=settings.get('n-trees', int, N_TREES),
        mtry=settings.get('mtry', _optional_int, None),
        min_node_size=settings.get('min-node-size', int, MIN_NODE_SIZE),
        max_depth=settings.get('max-depth', _optional_int, None),
        importance_method=settings.get('importance', str, IMPORTANCE_METHOD),
    )
    top_k = settings.get('top-k', int, TOP_K)
    trials = TrialsConfig(
        max_trials_per_subject=settings.get('max-trials', int, MAX_TRIALS),
        top_k=top_k,
        early_stop_window=settings.get('early-stop-window', int, EARLY_STOP_WINDOW),
        forest=forest,
    )
    data = settings.get('data', str, None)
    default_schemes = SCHEMES + (TRIALS_SCHEME,) if args.command == 'benchmark' else SCHEMES
    return RunConfig(
        out=Path(settings.get('out', str, '.')),
        data=Path(data) if data else None,
        label=settings.flag('label', manifest.label_column),
        subject=settings.flag('subject', manifest.subject_column) or None,
        ordinal_spec=dict(manifest.ordinal_spec),
        na_tokens=tuple(settings.flag('na', manifest.na_tokens)),
        scheme=settings.get('scheme', str, DEFAULT_SCHEME),
        schemes=tuple(settings.get('schemes', _names, default_schemes)),
        seeds=tuple(settings.get('seed', _seeds, DEFAULT_SEEDS)),
        forest=forest,
        trials=trials,
        k=settings.get('k', int, K_FOLDS),
        test_fraction=settings.get('test-fraction', float, TEST_FRACTION),
        top_k=top_k,
        sizes=tuple(settings.get('sizes', parse_int_list, BENCHMARK_SIZES)),
        counts=tuple(settings.get('counts', parse_int_list, SWEEP_TRIALS)),
        benchmark_trials=settings.get('benchmark-trials', int, BENCHMARK_TRIALS),
        with_trials=settings.get('with-trials', parse_bool, False),
        title=settings.get('title', str, None),
        threads=worker_count(),
        verbose=bool(getattr(args, 'verbose', False)),
    )


def load_dataset(config: RunConfig) -> tuple[Dataset, DatasetProfile]:
    if config.data is None:
        raise ConfigError("no dataset given (--data or 'data' in the manifest)")
    if not config.label:
        raise ConfigError("no label column given (--label or 'label' in the manifest)")
    return load_csv(config.data, config.label, config.subject, config.ordinal_spec, config.na_tokens)


def _dataset_dict(dataset: Dataset, profile: DatasetProfile) -> dict:
    return dict(profile.to_dict(), name=dataset.name, n_subjects=dataset.n_subjects)


def _importance_scores(report) -> dict:
    return {report.feature_names[i]: float(report.mean_importance[i]) for i in report.top_features}


def _validation_rows(report) -> list[dict]:
    return [
        {'scheme': report.scheme.value, 'seed': report.seed, 'rank': rank, 'feature': report.feature_names[index],
         'score': float(report.mean_importance[index])}
        for rank, index in enumerate(report.top_features, start=1)
    ]


def cmd_validate(config: RunConfig, completed: list) -> dict:
    dataset, profile = load_dataset(config)
    runs = []
    rows = []
    for seed in config.seeds:
        report = run_scheme(config.scheme, dataset, config.forest, seed, k=config.k,
                            test_fraction=config.test_fraction, top_k=config.top_k, n_jobs=config.threads)
        runs.append(report.to_dict())
        rows.extend(_validation_rows(report))
        title = config.title or f"{report.scheme.value} importance, seed {seed}"
        write_text(render_svg_bars(_importance_scores(report), title),
                   config.out / f"importance_{report.scheme.value}_{seed}.svg")
        completed.append(f"{report.scheme.value}@{seed}")
        print(f"{report.scheme.value} seed {seed}: accuracy {report.accuracy:.4f}, "
              f"balanced accuracy {report.balanced_accuracy:.4f}, top features "
              f"{[report.feature_names[i] for i in report.top_features]}")
    document = {'command': 'validate', 'dataset': _dataset_dict(dataset, profile), 'config': config.to_dict(),
                'runs': runs}
    write_json(document, config.out / REPORT_FILE)
    write_table(rows, config.out / RANKINGS_FILE, columns=['scheme', 'seed', 'rank', 'feature', 'score'])
    return document


def _tally_rows(report) -> list[dict]:
    order = sorted(range(len(report.feature_names)),
                   key=lambda i: (-report.group_tally.borda[i], -report.group_tally.membership[i], i))
    return [{'feature': report.feature_names[i], 'borda': float(report.group_tally.borda[i]),
             'membership': int(report.group_tally.membership[i])} for i in order]


def _subject_rows(report) -> list[dict]:
    rows = []
    for subject, summary in sorted(report.per_subject.items()):
        for rank, index in enumerate(summary.ranking, start=1):
            rows.append({'seed': report.config.master_seed, 'subject': subject, 'rank': rank,
                         'feature': report.feature_names[index], 'borda': float(summary.tally.borda[index])})
    return rows


def _borda_scores(report, ranking: Sequence[int], borda: np.ndarray) -> dict:
    return {report.feature_names[i]: float(borda[i]) for i in ranking}


def _cross_seed_agreement(reports: list) -> list[dict]:
    pairs = []
    for a, b in combinations(reports, 2):
        try:
            rho = spearman_rho(a.group_tally.borda, b.group_tally.borda)
        except StatsError:
            rho = None
        pairs.append({'seed_a': a.config.master_seed, 'seed_b': b.config.master_seed,
                      'jaccard': set_jaccard(a.group_ranking, b.group_ranking), 'spearman': rho})
    return pairs


def cmd_trials(config: RunConfig, completed: list) -> dict:
    dataset, profile = load_dataset(config)
    reports = []
    subject_rows = []
    for seed in config.seeds:
        report = run_randomized_trials(dataset, config.trials_for(seed), n_jobs=config.threads)
        reports.append(report)
        subject_rows.extend(_subject_rows(report))
        tally_rows = _tally_rows(report)
        write_table(tally_rows, config.out / f"tally_{seed}.csv", columns=['feature', 'borda', 'membership'])
        if len(reports) == 1:
            write_table(tally_rows, config.out / TALLY_FILE, columns=['feature', 'borda', 'membership'])
        write_text(render_svg_bars(_borda_scores(report, report.group_ranking, report.group_tally.borda),
                                   config.title or f"group ranking, seed {seed}"),
                   config.out / (GROUP_PLOT_FILE if len(reports) == 1 else f"group_{seed}.svg"))
        if len(reports) == 1:
            ranked = [summary for _, summary in sorted(report.per_subject.items()) if summary.ranking]
            if ranked:
                first = ranked[0]
                write_text(render_svg_bars(_borda_scores(report, first.ranking, first.tally.borda),
                                           f"subject {first.subject} ranking, seed {seed}"),
                           config.out / f"subject_{first.subject}.svg")
        completed.append(f"trials@{seed}")
        print(f"trials seed {seed}: trial accuracy {report.trial_accuracy:.4f}, majority accuracy "
              f"{report.majority_accuracy:.4f}, stability iteration {report.stability_iteration}, "
              f"group ranking {report.names(report.group_ranking)}")
    document = {'command': 'trials', 'dataset': _dataset_dict(dataset, profile), 'config': config.to_dict(),
                'runs': [report.to_dict() for report in reports],
                'seed_agreement': _cross_seed_agreement(reports)}
    write_json(document, config.out / REPORT_FILE)
    write_table(subject_rows, config.out / RANKINGS_FILE, columns=['seed', 'subject', 'rank', 'feature', 'borda'])
    return document


@dataclass(frozen=True)
class _Cell:
    scheme: str
    seed: int
    accuracy: float
    balanced_accuracy: Optional[float]
    scores: np.ndarray
    top: tuple
    wall_time_ms: float
    # mean decrease in gini, absent for trials cells
    mdi: Optional[np.ndarray] = None

    @property
    def name(self) -> str:
        return f"{self.scheme}@{self.seed}"


def _mdi_top(cell: _Cell, names: Sequence[str], k: int) -> Optional[list]:
    if cell.mdi is None:
        return None
    return [names[i] for i in top_k_features(ImportanceVector(cell.mdi, ImportanceMethod.MDI), min(k, len(names)))]


def cmd_compare(config: RunConfig, completed: list) -> dict:
    """Every scheme under every seed, then pairwise agreement of the top-k sets and importance vectors."""
    dataset, profile = load_dataset(config)
    names = dataset.feature_names
    cells = []
    for scheme in config.schemes:
        for seed in config.seeds:
            report = run_scheme(scheme, dataset, config.forest, seed, k=config.k, test_fraction=config.test_fraction,
                                top_k=config.top_k, n_jobs=config.threads)
            cells.append(_Cell(report.scheme.value, seed, report.accuracy, report.balanced_accuracy,
                               report.mean_importance, tuple(report.top_features), report.wall_time_ms,
                               report.mean_mdi))
            completed.append(cells[-1].name)
    if config.with_trials:
        for seed in config.seeds:
            report = run_randomized_trials(dataset, replace(config.trials_for(seed), top_k=config.top_k),
                                           n_jobs=config.threads)
            cells.append(_Cell(TRIALS_SCHEME, seed, report.trial_accuracy, None, report.group_tally.borda,
                               tuple(report.group_ranking), report.wall_time_ms))
            completed.append(cells[-1].name)
    pairs = []
    for a, b in combinations(cells, 2):
        try:
            rho = spearman_rho(a.scores, b.scores)
        except StatsError:
            rho = None
        pairs.append({'a': a.name, 'b': b.name, 'jaccard': set_jaccard(a.top, b.top), 'spearman': rho})
    rows = [{'scheme': cell.scheme, 'seed': cell.seed, 'rank': rank, 'feature': names[index],
             'score': float(cell.scores[index])}
            for cell in cells for rank, index in enumerate(cell.top, start=1)]
    document = {
        'command': 'compare',
        'dataset': _dataset_dict(dataset, profile),
        'config': config.to_dict(),
        'cells': [{'scheme': cell.scheme, 'seed': cell.seed, 'accuracy': cell.accuracy,
                   'balanced_accuracy': cell.balanced_accuracy, 'top_features': list(cell.top),
                   'top_feature_names': [names[i] for i in cell.top], 
                   'mdi_top_feature_names': _mdi_top(cell, names, config.top_k), 'wall_time_ms': cell.wall_time_ms}
                  for cell in cells],
        'pairs': pairs,
    }
    write_json(document, config.out / REPORT_FILE)
    write_table(rows, config.out / RANKINGS_FILE, columns=['scheme', 'seed', 'rank', 'feature', 'score'])
    panels = [(cell.name, {names[i]: float(cell.scores[i]) for i in cell.top}) for cell in cells]
    write_text(render_svg_grid(panels, config.title or "feature importance by scheme and seed"),
               config.out / COMPARE_PLOT_FILE)
    for pair in pairs:
        print(f"{pair['a']} vs {pair['b']}: jaccard {pair['jaccard']:.2f}, spearman {pair['spearman']}")
    return document


def cmd_benchmark(config: RunConfig, completed: list) -> list:
    dataset, _ = load_dataset(config)
    seed = config.seeds[0]
    rows = run_benchmark(dataset, config.forest, config.sizes, config.schemes, seed, k=config.k,
                         test_fraction=config.test_fraction, top_k=config.top_k,
                         trials_cfg=config.trials_for(seed), benchmark_trials=config.benchmark_trials,
                         n_jobs=config.threads)
    completed.extend(f"{row.scheme}@{row.sample_size}" for row in rows)
    write_table([row.to_dict() for row in rows], config.out / BENCHMARK_FILE,
                columns=['dataset', 'sample_size', 'scheme', 'wall_time_ms', 'accuracy'])
    write_table(benchmark_table(rows), config.out / BENCHMARK_TABLE_FILE)
    for row in rows:
        print(f"n={row.sample_size} {row.scheme}: {row.wall_time_ms / 1000:.2f} s, accuracy {row.accuracy:.4f}")
    return rows


def cmd_stats(config: RunConfig, completed: list, rankings_a: Path, rankings_b: Path) -> dict:
    comparison = compare_rankings(read_ranking_csv(rankings_a), read_ranking_csv(rankings_b), config.top_k)
    completed.append('compare_rankings')
    document = {'command': 'stats', 'comparison': comparison, 'rankings_a': Path(rankings_a).name,
                'rankings_b': Path(rankings_b).name}
    if config.data is not None:
        dataset, _ = load_dataset(config)
        welch = welch_table(dataset)
        correlations = feature_class_spearman(dataset)
        document['welch'] = {name: (result.to_dict() if result else None) for name, result in welch.items()}
        document['feature_spearman'] = correlations
        write_table([dict({'feature': name}, **(result.to_dict() if result else
                                                {'t': None, 'df': None, 'p_two_sided': None}))
                     for name, result in welch.items()],
                    config.out / WELCH_FILE, columns=['feature', 't', 'df', 'p_two_sided'])
        write_table([{'feature': name, 'rho': rho} for name, rho in correlations.items()],
                    config.out / FEATURE_SPEARMAN_FILE, columns=['feature', 'rho'])
        completed.append('feature_tests')
    write_json(document, config.out / REPORT_FILE)
    print(f"spearman {comparison['spearman']}, jaccard(top {comparison['top_k']}) {comparison['jaccard']:.2f}, "
          f"shared {comparison['shared_features']}")
    return document


def cmd_plot(config: RunConfig, completed: list, tally: Path) -> str:
    scores = read_ranking_csv(tally)
    svg = render_svg_bars(scores, config.title or Path(tally).stem)
    write_text(svg, config.out / PLOT_FILE)
    completed.append(PLOT_FILE)
    print(f"wrote {config.out / PLOT_FILE}")
    return svg


def cmd_sweep(config: RunConfig, completed: list) -> dict:
    dataset, profile = load_dataset(config)
    runs = []
    rows = []
    for seed in config.seeds:
        sweep = sweep_trial_counts(dataset, config.trials_for(seed), config.counts, n_jobs=config.threads)
        runs.append({'seed': seed, 'rows': [row.to_dict() for row in sweep]})
        for row in sweep:
            rows.append({'seed': seed, 'max_trials': row.max_trials, 'trial_accuracy': row.trial_accuracy,
                         'majority_accuracy': row.majority_accuracy,
                         'group_ranking': ';'.join(row.group_ranking_names),
                         'stability_iteration': row.stability_iteration})
            print(f"seed {seed}, {row.max_trials} trials: trial accuracy {row.trial_accuracy:.4f}, "
                  f"group ranking {list(row.group_ranking_names)}")
        completed.append(f"sweep@{seed}")
    document = {'command': 'sweep', 'dataset': _dataset_dict(dataset, profile), 'config': config.to_dict(),
                'counts': sorted(set(config.counts)), 'runs': runs}
    write_json(document, config.out / REPORT_FILE)
    write_table(rows, config.out / SWEEP_FILE, columns=['seed', 'max_trials', 'trial_accuracy', 'majority_accuracy',
                                                        'group_ranking', 'stability_iteration'])
    return document


def _common_parser() -> argparse.ArgumentParser:
    # every default is None so that manifest values can fill the flags that were not given
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--data', help="input CSV file")
    common.add_argument('--manifest', '--config', dest='manifest', help="key = value file with dataset and run settings")
    common.add_argument('--label', help="name of the binary label column")
    common.add_argument('--subject', help="name of the subject column (every row is a subject when omitted)")
    common.add_argument('--na', type=_tokens, help="comma separated missing value tokens")
    common.add_argument('--out', help="output directory (default: current directory)")
    common.add_argument('--seed', nargs='+', type=parse_seed, help="master seeds, decimal or 0x hex (default: 42 43)")
    common.add_argument('--n-trees', type=int)
    common.add_argument('--mtry', type=int)
    common.add_argument('--min-node-size', type=int)
    common.add_argument('--max-depth', type=int)
    common.add_argument('--importance', choices=['mdi', 'oob'])
    common.add_argument('--top-k', type=int)
    common.add_argument('--title')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help="debug logging")
    verbosity.add_argument('-q', '--quiet', action='store_true', help="warnings and errors only")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog='stabforest', description="Seed-stable random forest feature importance")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest='command', required=True)
    scheme_choices = [scheme.value for scheme in Scheme]

    validate = commands.add_parser('validate', parents=[common], help="run one validation scheme per seed")
    validate.add_argument('--scheme', choices=scheme_choices)
    validate.add_argument('--k', type=int)
    validate.add_argument('--test-fraction', type=float)

    trials = commands.add_parser('trials', parents=[common], help="run the randomized trials protocol")
    trials.add_argument('--max-trials', type=int)
    trials.add_argument('--early-stop-window', type=int)

    compare = commands.add_parser('compare', parents=[common], help="compare schemes and seeds")
    compare.add_argument('--schemes', nargs='+', choices=scheme_choices)
    compare.add_argument('--k', type=int)
    compare.add_argument('--test-fraction', type=float)
    compare.add_argument('--with-trials', action='store_const', const=True, default=None)
    compare.add_argument('--max-trials', type=int)
    compare.add_argument('--early-stop-window', type=int)

    benchmark = commands.add_parser('benchmark', parents=[common], help="time the schemes on subsamples")
    benchmark.add_argument('--sizes', nargs='+', type=int)
    benchmark.add_argument('--schemes', nargs='+', choices=scheme_choices + [TRIALS_SCHEME])
    benchmark.add_argument('--benchmark-trials', type=int)
    benchmark.add_argument('--k', type=int)
    benchmark.add_argument('--test-fraction', type=float)
    benchmark.add_argument('--max-trials', type=int)
    benchmark.add_argument('--early-stop-window', type=int)

    stats = commands.add_parser('stats', parents=[common], help="compare two rankings")
    stats.add_argument('--rankings-a', required=True, type=Path)
    stats.add_argument('--rankings-b', required=True, type=Path)

    plot = commands.add_parser('plot', parents=[common], help="bar plot of a tally or ranking CSV")
    plot.add_argument('--tally', required=True, type=Path)

    sweep = commands.add_parser('sweep', parents=[common], help="trial accuracy and ranking per trial budget")
    sweep.add_argument('--counts', nargs='+', type=int)
    sweep.add_argument('--early-stop-window', type=int)
    return parser


def _configure_logging(args: argparse.Namespace):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def run(args: argparse.Namespace, completed: list):
    config = resolve_config(args)
    if args.command == 'validate':
        return cmd_validate(config, completed)
    if args.command == 'trials':
        return cmd_trials(config, completed)
    if args.command == 'compare':
        return cmd_compare(config, completed)
    if args.command == 'benchmark':
        return cmd_benchmark(config, completed)
    if args.command == 'stats':
        return cmd_stats(config, completed, args.rankings_a, args.rankings_b)
    if args.command == 'plot':
        return cmd_plot(config, completed, args.tally)
    return cmd_sweep(config, completed)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    completed = []
    try:
        run(args, completed)
    except (StabForestError, OSError) as error:
        logger.error("%s failed: %s", args.command, error)
        print(f"error: {error}", file=sys.stderr)
        out_dir = args.out
        if out_dir is None and args.manifest:
            try:
                out_dir = parse_kv_file(args.manifest).get('out')
            except ConfigError:
                out_dir = None
        write_error(out_dir or '.', args.command, error, completed)
        return 1
    return 0
