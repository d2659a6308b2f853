import os

import numpy as np
import pytest

from stabforest.data import Dataset, load_csv, make_planted_dataset
from stabforest.forest import ForestConfig

BREAST_CANCER_ENV = 'STABFOREST_BREAST_CANCER'


@pytest.fixture
def small_forest():
    return ForestConfig(n_trees=25)


@pytest.fixture
def planted():
    # 3 informative columns, wide margin: a single LOSO run is near perfect
    return make_planted_dataset(n_rows=80, n_informative=3, n_noise=5, margin=3.0, seed=7)


@pytest.fixture
def planted_subjects():
    return make_planted_dataset(n_rows=60, n_informative=3, n_noise=5, margin=3.0, seed=11, n_subjects=12)


@pytest.fixture
def separable():
    """Feature 'signal' separates the classes at 0.5, 'noise' is uninformative."""
    labels = np.array([0, 1] * 10)
    signal = labels + np.linspace(-0.2, 0.2, 20)
    noise = np.linspace(0.0, 1.0, 20)[::-1]
    return Dataset(
        features=np.column_stack([noise, signal]),
        labels=labels,
        feature_names=('noise', 'signal'),
        subject_ids=np.arange(20),
        n_subjects=20,
    )


@pytest.fixture
def write_csv_file(tmp_path):
    def write(text, name='data.csv'):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return path
    return write


@pytest.fixture(scope='session')
def breast_cancer():
    path = os.environ.get(BREAST_CANCER_ENV)
    if not path:
        pytest.skip(f"{BREAST_CANCER_ENV} is not set")
    dataset, _ = load_csv(path, 'class')
    return dataset
