import pytest

from stabforest.config import normalize_key, parse_bool, parse_kv_file
from stabforest.errors import ConfigError
from stabforest.utils import Stopwatch, parse_int_list, parse_seed, worker_count


def test_parse_kv_file(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text("# run settings\n\nlabel = class\nMAX_TRIALS = 200\nseed=42,0x2b\nordinal.Grade = a,b\n")
    values = parse_kv_file(path)
    assert values == {'label': 'class', 'max-trials': '200', 'seed': '42,0x2b', 'ordinal.Grade': 'a,b'}


def test_parse_kv_file_unknown_key(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text("labels = class\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_kv_file(path)


def test_parse_kv_file_malformed_line(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text("label class\n")
    with pytest.raises(ConfigError):
        parse_kv_file(path)


def test_parse_kv_file_missing(tmp_path):
    with pytest.raises(ConfigError):
        parse_kv_file(tmp_path / 'absent.cfg')


def test_normalize_key():
    assert normalize_key(' Early_Stop_Window ') == 'early-stop-window'


@pytest.mark.parametrize('text, expected', [('yes', True), ('0', False), ('True', True), (False, False)])
def test_parse_bool(text, expected):
    assert parse_bool(text) is expected


def test_parse_bool_invalid():
    with pytest.raises(ConfigError):
        parse_bool('maybe')


@pytest.mark.parametrize('text, expected', [('42', 42), ('0x2A', 42), (7, 7), ('0xffffffffffffffff', (1 << 64) - 1)])
def test_parse_seed(text, expected):
    assert parse_seed(text) == expected


@pytest.mark.parametrize('text', ['-1', '0x1ffffffffffffffff', 'seed'])
def test_parse_seed_invalid(text):
    with pytest.raises(ConfigError):
        parse_seed(text)


def test_parse_int_list():
    assert parse_int_list('250, 500,2000') == [250, 500, 2000]
    assert parse_int_list([1, 2]) == [1, 2]
    with pytest.raises(ConfigError):
        parse_int_list('1,x')


def test_worker_count(monkeypatch):
    monkeypatch.delenv('STABFOREST_THREADS', raising=False)
    assert worker_count() == -1
    monkeypatch.setenv('STABFOREST_THREADS', '3')
    assert worker_count() == 3
    monkeypatch.setenv('STABFOREST_THREADS', '0')
    with pytest.raises(ConfigError):
        worker_count()


def test_stopwatch():
    with Stopwatch() as watch:
        sum(range(1000))
    assert watch.elapsed_ms > 0
