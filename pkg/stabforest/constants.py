"""
This file contains the default values used across stabforest.
Every value can be overridden from a manifest file or from the command line.
"""

# forest
N_TREES = 500 # number of trees per forest (ntree)
MIN_NODE_SIZE = 1 # a node holding this many samples or fewer becomes a leaf (nodesize)
MAX_DEPTH = None # unlimited depth
IMPORTANCE_METHOD = 'oob' # 'oob' (out-of-bag permutation) or 'mdi' (mean decrease in gini)

# validation schemes
TEST_FRACTION = 0.2 # 80/20 holdout
K_FOLDS = 10 # k of k-fold cross validation
SCHEMES = ('holdout', 'kfold', 'loso') # schemes run by compare and benchmark
DEFAULT_SCHEME = 'kfold' # scheme of the validate command

# randomized trials
MAX_TRIALS = 400 # maximum trials per subject
TOP_K = 5 # size of the recorded feature set
EARLY_STOP_WINDOW = 50 # consecutive correct trials with an unchanged set before stopping, 0 disables
SWEEP_TRIALS = (50, 100, 200, 400, 1000) # trial budgets explored by the sweep command

# seeds
DEFAULT_SEEDS = (42, 43) # master seeds compared by default
SEED_MAX = (1 << 64) - 1 # seeds are unsigned 64 bit integers

# data
NA_TOKENS = ('', 'NA', '?') # cell values treated as missing

# benchmark
BENCHMARK_SIZES = (250, 500, 2000) # subsample sizes timed by the benchmark command
BENCHMARK_TRIALS = 400 # trial budget the single-LOSO time is scaled by

# runtime
THREADS_ENV = 'STABFOREST_THREADS' # caps the worker count, all cores when unset
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

# output files
REPORT_FILE = 'report.json'
ERROR_FILE = 'error.json'
RANKINGS_FILE = 'rankings.csv'
TALLY_FILE = 'tally.csv'
BENCHMARK_FILE = 'benchmark.csv'
BENCHMARK_TABLE_FILE = 'benchmark_table.csv'
SWEEP_FILE = 'sweep.csv'
WELCH_FILE = 'welch.csv'
FEATURE_SPEARMAN_FILE = 'spearman_features.csv'
PLOT_FILE = 'plot.svg'
COMPARE_PLOT_FILE = 'compare.svg'
GROUP_PLOT_FILE = 'group.svg'
