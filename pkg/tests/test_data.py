import numpy as np
import pytest

from stabforest.data import (Dataset, load_csv, load_manifest, make_planted_dataset, profile, split_train_test,
                             subject_partition, subsample, write_csv)
from stabforest.errors import ConfigError, DatasetError, DegenerateFoldError


def test_load_csv_drops_incomplete_rows(write_csv_file):
    path = write_csv_file("a,b,label\n1,2,x\n3,,y\n5,6,y\n")
    dataset, prof = load_csv(path, 'label')
    assert dataset.n_rows == 2
    assert prof.n_dropped_rows == 1


def test_load_csv_question_mark_is_missing(write_csv_file):
    path = write_csv_file("a,b,label\n1,2,x\n3,?,y\n4,5,y\n")
    dataset, prof = load_csv(path, 'label')
    assert dataset.n_rows == 2
    assert prof.n_dropped_rows == 1


def test_load_csv_maps_labels_lexicographically(write_csv_file):
    path = write_csv_file("a,b,class\n1,2,malignant\n3,4,benign\n5,6,malignant\n")
    dataset, _ = load_csv(path, 'class')
    assert dataset.labels.tolist() == [1, 0, 1]
    assert dataset.label_values == ('benign', 'malignant')
    assert dataset.feature_names == ('a', 'b')


def test_load_csv_rejects_three_label_values(write_csv_file):
    path = write_csv_file("a,b,label\n1,2,x\n3,4,y\n5,6,z\n")
    with pytest.raises(DatasetError, match="label not binary"):
        load_csv(path, 'label')


def test_load_csv_rejects_single_label_value(write_csv_file):
    path = write_csv_file("a,b,label\n1,2,x\n3,4,x\n5,,y\n")
    with pytest.raises(DatasetError, match="label not binary"):
        load_csv(path, 'label')


def test_load_csv_ragged_row(write_csv_file):
    path = write_csv_file("a,b,c,label\n1,2,0,1\n3,4,1,9,9\n5,6,1,0\n")
    with pytest.raises(DatasetError, match="cannot parse"):
        load_csv(path, 'label')


def test_load_csv_parses_numbers_exactly(write_csv_file):
    path = write_csv_file("a,b,label\n0.1,3.141592653589793,0\n1e-300,-2.2250738585072014e-308,1\n"
                          "0.30000000000000004,123456789.12345679,1\n")
    dataset, prof = load_csv(path, 'label')
    assert dataset.features[:, 0].tolist() == [0.1, 1e-300, 0.30000000000000004]
    assert dataset.features[:, 1].tolist() == [3.141592653589793, -2.2250738585072014e-308, 123456789.12345679]
    assert prof.n_ordinals == 0


def test_load_csv_non_finite_text_is_categorical(write_csv_file):
    path = write_csv_file("a,b,label\n1,inf,0\n2,3,1\n3,4,1\n")
    dataset, prof = load_csv(path, 'label')
    # lexicographic: 3 < 4 < inf
    assert dataset.features[:, 1].tolist() == [2.0, 0.0, 1.0]
    assert prof.n_ordinals == 1


def test_load_csv_missing_label_column(write_csv_file):
    path = write_csv_file("a,b,c\n1,2,0\n3,4,1\n")
    with pytest.raises(DatasetError, match="missing label column"):
        load_csv(path, 'label')


def test_load_csv_duplicate_feature_names(write_csv_file):
    path = write_csv_file("a,a,label\n1,2,0\n3,4,1\n")
    with pytest.raises(DatasetError, match="duplicate"):
        load_csv(path, 'label')


def test_load_csv_empty_after_drop(write_csv_file):
    path = write_csv_file("a,b,label\n1,,0\n")
    with pytest.raises(DatasetError, match="empty"):
        load_csv(path, 'label')


def test_load_csv_categorical_and_ordinal_encoding(write_csv_file):
    path = write_csv_file(
        "grade,colour,size,label\n"
        "high,red,1.5,0\n"
        "low,blue,2.5,1\n"
        "medium,green,3.5,0\n"
    )
    dataset, prof = load_csv(path, 'label', ordinal_spec={'grade': ['low', 'medium', 'high']})
    assert dataset.features[:, 0].tolist() == [2.0, 0.0, 1.0]
    # lexicographic: blue < green < red
    assert dataset.features[:, 1].tolist() == [2.0, 0.0, 1.0]
    assert dataset.features[:, 2].tolist() == [1.5, 2.5, 3.5]
    assert prof.n_ordinals == 2
    assert prof.total_cardinality == 6


def test_load_csv_ordinal_value_outside_order(write_csv_file):
    path = write_csv_file("grade,x,label\nhigh,1,0\nhuge,2,1\n")
    with pytest.raises(DatasetError):
        load_csv(path, 'label', ordinal_spec={'grade': ['low', 'high']})


def test_load_csv_subject_column_first_appearance_order(write_csv_file):
    path = write_csv_file("a,b,pid,label\n1,2,p9,0\n3,4,p1,1\n5,6,p9,1\n7,8,p5,0\n")
    dataset, _ = load_csv(path, 'label', subject_column='pid')
    assert dataset.n_subjects == 3
    assert dataset.subject_ids.tolist() == [0, 1, 0, 2]
    assert dataset.feature_names == ('a', 'b')


def test_default_subject_mapping_is_one_row_per_subject(write_csv_file):
    path = write_csv_file("a,b,label\n1,2,0\n3,4,1\n5,6,1\n")
    dataset, _ = load_csv(path, 'label')
    assert dataset.subject_ids.tolist() == [0, 1, 2]
    assert dataset.n_subjects == 3


def test_dataset_is_read_only(planted):
    with pytest.raises(ValueError):
        planted.features[0, 0] = 1.0


def test_dataset_rejects_single_feature():
    with pytest.raises(DatasetError):
        Dataset(features=np.zeros((2, 1)), labels=[0, 1], feature_names=('a',), subject_ids=[0, 1], n_subjects=2)


def test_dataset_rejects_non_finite_values():
    with pytest.raises(DatasetError):
        Dataset(features=[[0.0, np.nan], [1.0, 2.0]], labels=[0, 1], feature_names=('a', 'b'),
                subject_ids=[0, 1], n_subjects=2)


def test_write_csv_round_trip(tmp_path, planted_subjects):
    path = tmp_path / 'planted.csv'
    write_csv(planted_subjects, path)
    loaded, _ = load_csv(path, 'label', subject_column='subject')
    assert (loaded.features == planted_subjects.features).all()
    assert loaded.labels.tolist() == planted_subjects.labels.tolist()
    assert loaded.n_subjects == planted_subjects.n_subjects
    assert loaded.feature_names == planted_subjects.feature_names


def test_write_csv_round_trip_is_bit_exact(tmp_path):
    dataset = make_planted_dataset(n_rows=300, n_informative=3, n_noise=5, seed=3)
    path = tmp_path / 'planted.csv'
    write_csv(dataset, path)
    loaded, _ = load_csv(path, 'label')
    assert int((loaded.features != dataset.features).sum()) == 0
    assert loaded.labels.tolist() == dataset.labels.tolist()


def test_load_manifest(tmp_path):
    path = tmp_path / 'manifest.cfg'
    path.write_text("# dataset\nlabel = class\nsubject = pid\nordinal.Grade = low, high\nna = ,NA,?,-\nseed = 42\n")
    manifest = load_manifest(path)
    assert manifest.label_column == 'class'
    assert manifest.subject_column == 'pid'
    assert manifest.ordinal_spec == {'Grade': ['low', 'high']}
    assert manifest.na_tokens == ('', 'NA', '?', '-')


def test_load_manifest_requires_label(tmp_path):
    path = tmp_path / 'manifest.cfg'
    path.write_text("subject = pid\n")
    with pytest.raises(ConfigError):
        load_manifest(path)


def test_split_train_test_sizes_and_determinism(separable):
    dataset = separable.take(np.arange(10))
    train, test = split_train_test(dataset, 0.2, 5)
    assert (train.n_rows, test.n_rows) == (8, 2)
    again_train, again_test = split_train_test(dataset, 0.2, 5)
    assert test.row_ids.tolist() == again_test.row_ids.tolist()
    assert sorted(train.row_ids.tolist() + test.row_ids.tolist()) == list(range(10))


def test_split_test_size_rounds_half_up():
    dataset = make_planted_dataset(n_rows=683, n_informative=2, n_noise=0, seed=1)
    _, test = split_train_test(dataset, 0.2, 42)
    assert test.n_rows == 137


@pytest.mark.parametrize('fraction', [0.0, 1.0, -0.1, 1.5])
def test_split_fraction_out_of_range(planted, fraction):
    with pytest.raises(ConfigError, match="fraction out of range"):
        split_train_test(planted, fraction, 1)


def test_subject_partition_default_mapping(planted):
    train, holdout = subject_partition(planted, 3)
    assert holdout.row_ids.tolist() == [3]
    assert train.n_rows == planted.n_rows - 1
    assert 3 not in train.row_ids.tolist()


def test_subject_partition_groups_rows(planted_subjects):
    train, holdout = subject_partition(planted_subjects, 2)
    assert holdout.n_rows == 5
    assert holdout.row_ids.tolist() == [2, 14, 26, 38, 50]
    assert train.n_subjects == planted_subjects.n_subjects - 1


def test_subject_partition_invalid_subject(planted):
    with pytest.raises(DatasetError):
        subject_partition(planted, planted.n_subjects)


def test_subject_partition_degenerate_fold():
    dataset = Dataset(features=[[0, 1], [1, 0], [2, 2]], labels=[0, 0, 1], feature_names=('a', 'b'),
                      subject_ids=[0, 0, 1], n_subjects=2)
    with pytest.raises(DegenerateFoldError, match="degenerate LOSO fold"):
        subject_partition(dataset, 1)


def test_subsample(planted_subjects):
    sample = subsample(planted_subjects, 20, 3)
    assert sample.n_rows == 20
    assert sample.row_ids.tolist() == list(range(20))
    assert sorted(set(sample.subject_ids.tolist())) == list(range(sample.n_subjects))
    assert subsample(planted_subjects, 20, 3).features.tolist() == sample.features.tolist()
    with pytest.raises(ConfigError):
        subsample(planted_subjects, planted_subjects.n_rows + 1, 3)


def test_planted_dataset_layout():
    dataset = make_planted_dataset(n_rows=200, n_informative=5, n_noise=15, margin=1.0, seed=0)
    assert dataset.n_features == 20
    assert dataset.feature_names[:5] == tuple(f"inf_{i}" for i in range(5))
    assert dataset.feature_names[5] == 'noise_0'
    assert int(dataset.labels.sum()) == 100
    # informative columns are shifted by the margin for class 1
    gap = dataset.features[dataset.labels == 1].mean(axis=0) - dataset.features[dataset.labels == 0].mean(axis=0)
    assert np.all(gap[:5] > 0.5)
    assert np.all(np.abs(gap[5:]) < 0.5)


def test_profile_of_in_memory_dataset(planted):
    prof = profile(planted)
    assert prof.n_rows == planted.n_rows
    assert prof.n_ordinals == 0
