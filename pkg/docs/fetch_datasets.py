"""
This file contains a helper script that downloads the UCI breast cancer wisconsin (original) data
and writes it as a CSV file with a header row, the layout stabforest load_csv expects.

    python docs/fetch_datasets.py --out data/breast_cancer.csv
    python -m stabforest validate --data data/breast_cancer.csv --label class --scheme kfold --out results/kfold

Missing cells ('?') are kept; load_csv drops those rows (16 of 699).
"""
import argparse
import io
from pathlib import Path

import pandas as pd
import requests

BREAST_CANCER_URL = 'https://archive.ics.uci.edu/ml/machine-learning-databases/breast-cancer-wisconsin/breast-cancer-wisconsin.data'
# column order of breast-cancer-wisconsin.names
BREAST_CANCER_COLUMNS = [
    'id', 'clump_thickness', 'cell_size_uniformity', 'cell_shape_uniformity', 'marginal_adhesion',
    'single_epithelial_cell_size', 'bare_nuclei', 'bland_chromatin', 'normal_nucleoli', 'mitoses', 'class',
]
TIMEOUT = 60 # seconds


def fetch_breast_cancer(out_path):
    response = requests.get(BREAST_CANCER_URL, timeout=TIMEOUT)
    response.raise_for_status()
    frame = pd.read_csv(io.StringIO(response.text), header=None, names=BREAST_CANCER_COLUMNS, dtype=str)
    # the sample id is not a feature
    frame = frame.drop(columns=['id'])
    # 2 = benign, 4 = malignant
    frame['class'] = frame['class'].map({'2': 'benign', '4': 'malignant'})
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_path, index=False)
    print(f"wrote {len(frame)} rows to {out_path}")


if __name__ == '__main__':
    parser = argparse.ArgumentParser(description="download the public datasets used in the Readme walkthrough")
    parser.add_argument('--out', default='data/breast_cancer.csv')
    args = parser.parse_args()
    fetch_breast_cancer(args.out)
