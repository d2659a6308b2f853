"""
This file contains the rank agreement and significance statistics used to corroborate a stabilized ranking:
Spearman correlation with average ranks, Welch's t-test (p-value through the regularized incomplete beta
function), Jaccard agreement of top-k sets, and the ranking comparisons behind the stats command
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .data import Dataset
from .errors import DatasetError, StatsError

logger = logging.getLogger(__name__)

BETA_TOLERANCE = 1e-10 # relative convergence of the continued fraction
BETA_MAX_ITERATIONS = 300
TINY = 1e-300 # keeps Lentz denominators away from zero


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_two_sided: float

    def to_dict(self) -> dict:
        return {'t': self.t, 'df': self.df, 'p_two_sided': self.p_two_sided}


def _vector(values, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 1:
        raise StatsError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(array)):
        raise StatsError(f"{name} holds non-finite values")
    return array


def rank_average(values) -> np.ndarray:
    """1-based ranks, tied values share the mean of the ranks they span."""
    array = _vector(values, 'values')
    if len(array) < 2:
        raise StatsError(f"ranking needs at least 2 values, got {len(array)}")
    return rankdata(array, method='average')


def pearson_r(x, y) -> float:
    x = _vector(x, 'x')
    y = _vector(y, 'y')
    if len(x) != len(y):
        raise StatsError(f"length mismatch: {len(x)} != {len(y)}")
    if len(x) < 2:
        raise StatsError("correlation needs at least 2 values")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise StatsError("correlation is undefined for a constant vector")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def spearman_rho(x, y) -> float:
    """Pearson correlation of the average-tie ranks of x and y."""
    x = _vector(x, 'x')
    y = _vector(y, 'y')
    if len(x) != len(y):
        raise StatsError(f"length mismatch: {len(x)} != {len(y)}")
    return pearson_r(rank_average(x), rank_average(y))


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    for m in range(1, BETA_MAX_ITERATIONS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETA_TOLERANCE:
            return h
    raise StatsError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """
    Input: shape parameters a, b > 0 and x in [0, 1]
    Returns I_x(a, b)
    """
    if a <= 0 or b <= 0:
        raise StatsError(f"beta parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise StatsError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the fraction converges fast below the mean, use the symmetry relation above it
    if x < (a + 1.0) / (a + b + 2.0):
        value = front * _beta_continued_fraction(a, b, x) / a
    else:
        value = 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b
    return min(1.0, max(0.0, value))


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with df degrees of freedom."""
    if df <= 0:
        raise StatsError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def welch_t(a, b) -> WelchResult:
    a = _vector(a, 'a')
    b = _vector(b, 'b')
    if len(a) < 2 or len(b) < 2:
        raise StatsError(f"each group needs at least 2 values, got {len(a)} and {len(b)}")
    na, nb = len(a), len(b)
    va = float(np.var(a, ddof=1))
    vb = float(np.var(b, ddof=1))
    diff = float(a.mean() - b.mean())
    se2 = va / na + vb / nb
    if se2 == 0.0:
        if diff == 0.0:
            return WelchResult(t=0.0, df=float(na + nb - 2), p_two_sided=1.0)
        raise StatsError("welch t is undefined: both groups are constant with different means")
    t = diff / math.sqrt(se2)
    df = se2 * se2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return WelchResult(t=t, df=df, p_two_sided=t_sf_two_sided(t, df))


def set_jaccard(a, b) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def feature_class_spearman(dataset: Dataset) -> dict[str, Optional[float]]:
    """
    Spearman rho between every feature column and the 0/1 label; constant columns map to None
    """
    if not dataset.has_both_classes():
        raise StatsError("feature/label correlation needs both classes")
    out = {}
    for index, name in enumerate(dataset.feature_names):
        try:
            out[name] = spearman_rho(dataset.features[:, index], dataset.labels)
        except StatsError:
            logger.info("feature %s is constant, no correlation reported", name)
            out[name] = None
    return out


def welch_table(dataset: Dataset) -> dict[str, Optional[WelchResult]]:
    """Welch's t-test of class 0 rows against class 1 rows for every feature; undefined tests map to None."""
    group_0 = dataset.features[dataset.labels == 0]
    group_1 = dataset.features[dataset.labels == 1]
    out = {}
    for index, name in enumerate(dataset.feature_names):
        try:
            out[name] = welch_t(group_0[:, index], group_1[:, index])
        except StatsError as error:
            logger.info("welch test undefined for %s: %s", name, error)
            out[name] = None
    return out


def _top_names(scores: Mapping[str, float], k: int) -> list[str]:
    return [name for name, _ in sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]]


def compare_rankings(a: Mapping[str, float], b: Mapping[str, float], k: int) -> dict:
    """
    Agreement of two feature scorings: Spearman over the union of features (absent scores count as 0)
    and the Jaccard index of the two top-k sets.
    """
    if k < 1:
        raise StatsError(f"k must be at least 1, got {k}")
    names = sorted(set(a) | set(b))
    top_a = _top_names(a, k)
    top_b = _top_names(b, k)
    rho = None
    if len(names) >= 2:
        try:
            rho = spearman_rho([a.get(name, 0.0) for name in names], [b.get(name, 0.0) for name in names])
        except StatsError:
            logger.warning("one of the rankings is constant over the shared features, spearman not reported")
    return {
        'n_features': len(names),
        'spearman': rho,
        'top_k': k,
        'top_a': top_a,
        'top_b': top_b,
        'jaccard': set_jaccard(top_a, top_b),
        'shared_features': sorted(set(top_a) & set(top_b)),
    }


def read_ranking_csv(path) -> dict[str, float]:
    """
    Input: a tally.csv (feature,borda,membership) or rankings.csv style file (feature,score)
    Returns feature name -> score
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.EmptyDataError, pd.errors.ParserError) as error:
        raise DatasetError(f"cannot read ranking file {path}: {error}") from None
    if 'feature' not in frame.columns:
        raise DatasetError(f"{path}: missing 'feature' column")
    for column in ('borda', 'score'):
        if column in frame.columns:
            break
    else:
        raise DatasetError(f"{path}: expected a 'borda' or 'score' column")
    if frame['feature'].duplicated().any():
        raise DatasetError(f"{path}: duplicate features")
    scores = pd.to_numeric(frame[column], errors='coerce')
    if scores.isna().any():
        raise DatasetError(f"{path}: non-numeric {column} values")
    return dict(zip(frame['feature'].astype(str), scores.astype(float)))
