import math

import numpy as np
import pytest
from scipy import integrate, special
from scipy import stats as scipy_stats

from stabforest.data import Dataset
from stabforest.errors import DatasetError, StatsError
from stabforest.stats import (compare_rankings, feature_class_spearman, pearson_r, rank_average, read_ranking_csv,
                              regularized_incomplete_beta, set_jaccard, spearman_rho, t_sf_two_sided, welch_t,
                              welch_table)


def test_spearman_examples():
    assert spearman_rho([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert spearman_rho([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert spearman_rho([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)


def test_spearman_rejects_constant_vector():
    with pytest.raises(StatsError):
        spearman_rho([1, 1, 1], [1, 2, 3])


def test_spearman_rejects_length_mismatch():
    with pytest.raises(StatsError):
        spearman_rho([1, 2, 3], [1, 2])


def test_spearman_is_invariant_under_monotone_transforms():
    rng = np.random.default_rng(1)
    x = rng.normal(size=30)
    y = x + rng.normal(size=30)
    assert spearman_rho(np.exp(x), y ** 3) == pytest.approx(spearman_rho(x, y))


@pytest.mark.parametrize('seed', range(10))
def test_spearman_with_ties_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 5, size=25)
    y = rng.integers(0, 5, size=25)
    assert spearman_rho(x, y) == pytest.approx(scipy_stats.spearmanr(x, y)[0], abs=1e-12)


def test_rank_average_ties():
    assert rank_average([10, 20, 20, 30]).tolist() == [1.0, 2.5, 2.5, 4.0]


def test_pearson_r():
    assert pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)


def test_welch_examples():
    result = welch_t([1, 2, 3], [2, 3, 4])
    assert result.t == pytest.approx(-1.2247, abs=1e-4)
    assert result.df == pytest.approx(4.0)
    assert result.p_two_sided == pytest.approx(0.288, abs=1e-3)


def test_welch_identical_groups():
    result = welch_t([1, 2, 3], [1, 2, 3])
    assert result.t == 0.0
    assert result.p_two_sided == pytest.approx(1.0)


def test_welch_constant_groups():
    result = welch_t([2, 2], [2, 2, 2])
    assert (result.t, result.df, result.p_two_sided) == (0.0, 3.0, 1.0)
    with pytest.raises(StatsError):
        welch_t([1, 1], [2, 2])


def test_welch_needs_two_values_per_group():
    with pytest.raises(StatsError):
        welch_t([1], [1, 2])


def test_welch_is_antisymmetric():
    a, b = [1.0, 4.0, 2.5, 3.3], [5.0, 6.1, 4.4]
    forward, backward = welch_t(a, b), welch_t(b, a)
    assert forward.t == pytest.approx(-backward.t)
    assert forward.p_two_sided == pytest.approx(backward.p_two_sided)


def test_welch_matches_scipy():
    rng = np.random.default_rng(4)
    a, b = rng.normal(0, 1, size=12), rng.normal(0.8, 2, size=9)
    expected = scipy_stats.ttest_ind(a, b, equal_var=False)
    result = welch_t(a, b)
    assert result.t == pytest.approx(expected.statistic)
    assert result.p_two_sided == pytest.approx(expected.pvalue, abs=1e-8)


@pytest.mark.parametrize('t', [0.0, 0.3, 1.0, 2.5, 5.0, -3.7])
@pytest.mark.parametrize('df', [1.0, 2.5, 4.0, 10.0, 57.3])
def test_t_tail_matches_oracle(t, df):
    assert t_sf_two_sided(t, df) == pytest.approx(2 * scipy_stats.t.sf(abs(t), df), abs=1e-6)


def test_t_tail_matches_numerical_integration():
    t, df = 1.2247448713915890, 4.0
    density = lambda x: scipy_stats.t.pdf(x, df)
    tail, _ = integrate.quad(density, abs(t), math.inf, epsabs=1e-12)
    assert t_sf_two_sided(t, df) == pytest.approx(2 * tail, abs=1e-8)


def test_p_decreases_with_abs_t():
    values = [t_sf_two_sided(t, 6.0) for t in np.linspace(0, 6, 25)]
    assert all(a > b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize('a, b', [(0.5, 0.5), (2.0, 0.5), (5.0, 3.0), (30.0, 0.5)])
@pytest.mark.parametrize('x', [0.0, 0.01, 0.3, 0.5, 0.9, 0.999, 1.0])
def test_incomplete_beta_matches_scipy(a, b, x):
    assert regularized_incomplete_beta(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-9)


def test_incomplete_beta_rejects_bad_arguments():
    with pytest.raises(StatsError):
        regularized_incomplete_beta(0.0, 1.0, 0.5)
    with pytest.raises(StatsError):
        regularized_incomplete_beta(1.0, 1.0, 1.5)


def test_set_jaccard():
    assert set_jaccard({1, 2}, {1, 2}) == 1.0
    assert set_jaccard({1}, {2}) == 0.0
    assert set_jaccard({'A', 'B', 'C'}, {'B', 'C', 'D'}) == 0.5
    assert set_jaccard(set(), set()) == 1.0


def test_compare_rankings():
    a = {'x': 10.0, 'y': 6.0, 'z': 3.0, 'w': 0.0}
    b = {'x': 9.0, 'y': 7.0, 'w': 2.0}
    result = compare_rankings(a, b, 2)
    assert result['top_a'] == ['x', 'y']
    assert result['top_b'] == ['x', 'y']
    assert result['jaccard'] == 1.0
    assert result['n_features'] == 4
    # features in name order w, x, y, z; z is absent from b and counts as 0
    assert result['spearman'] == pytest.approx(spearman_rho([0.0, 10.0, 6.0, 3.0], [2.0, 9.0, 7.0, 0.0]))


def test_read_ranking_csv(tmp_path):
    tally = tmp_path / 'tally.csv'
    tally.write_text("feature,borda,membership\nx,12,4\ny,3,2\n")
    assert read_ranking_csv(tally) == {'x': 12.0, 'y': 3.0}
    scores = tmp_path / 'rankings.csv'
    scores.write_text("feature,score\na,0.5\nb,0.25\n")
    assert read_ranking_csv(scores) == {'a': 0.5, 'b': 0.25}


def test_read_ranking_csv_rejects_bad_files(tmp_path):
    path = tmp_path / 'bad.csv'
    path.write_text("name,borda\nx,1\n")
    with pytest.raises(DatasetError):
        read_ranking_csv(path)
    path.write_text("feature,weight\nx,1\n")
    with pytest.raises(DatasetError):
        read_ranking_csv(path)


def _two_class_dataset():
    labels = np.array([0, 0, 0, 1, 1, 1])
    return Dataset(
        features=np.column_stack([[1.0, 2.0, 3.0, 2.0, 3.0, 4.0], [5.0] * 6, [3.0, 2.0, 1.0, 6.0, 5.0, 4.0]]),
        labels=labels,
        feature_names=('a', 'constant', 'c'),
        subject_ids=np.arange(6),
        n_subjects=6,
    )


def test_welch_table():
    table = welch_table(_two_class_dataset())
    assert table['a'].t == pytest.approx(-1.2247, abs=1e-4)
    assert table['constant'].t == 0.0
    assert table['c'].p_two_sided < 0.05


def test_feature_class_spearman():
    correlations = feature_class_spearman(_two_class_dataset())
    assert correlations['constant'] is None
    assert correlations['c'] > correlations['a'] > 0
