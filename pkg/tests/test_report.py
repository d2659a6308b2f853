import json

import jsonschema
import numpy as np

from stabforest.errors import DegenerateFoldError
from stabforest.report import dumps, load_schema, mask_timing, write_error, write_json, write_table


def test_dumps_sorts_keys_and_converts_numpy():
    text = dumps({'b': np.int64(2), 'a': np.array([1.5, 2.0]), 'c': frozenset({3, 1})})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert json.loads(text) == {'a': [1.5, 2.0], 'b': 2, 'c': [1, 3]}


def test_mask_timing_replaces_every_wall_time():
    doc = {'wall_time_ms': 12.5, 'runs': [{'wall_time_ms': 3.0, 'accuracy': 0.9}], 'x': 1}
    assert mask_timing(doc) == {'wall_time_ms': 0, 'runs': [{'wall_time_ms': 0, 'accuracy': 0.9}], 'x': 1}


def test_write_json_creates_directories(tmp_path):
    path = write_json({'a': 1}, tmp_path / 'nested' / 'report.json')
    assert json.loads(path.read_text()) == {'a': 1}


def test_write_table(tmp_path):
    path = write_table([{'feature': 'x', 'score': 0.5}], tmp_path / 'rankings.csv', columns=['feature', 'score'])
    assert path.read_text() == "feature,score\nx,0.5\n"


def test_error_log_matches_schema(tmp_path):
    path = write_error(tmp_path, 'validate', DegenerateFoldError("degenerate LOSO fold"), ['kfold@42'])
    doc = json.loads(path.read_text())
    jsonschema.validate(doc, load_schema('error.schema.json'))
    assert doc['error_type'] == 'DegenerateFoldError'
    assert doc['completed'] == ['kfold@42']
