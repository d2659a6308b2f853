"""
This file contains the parser of the flat key-value files used both as dataset manifest and as run configuration.

    # breast cancer, complete cases
    label = class
    ordinal.grade = low,medium,high
    seed = 42,43
    max-trials = 400

Keys mirror the long command line flags ('_' and '-' are interchangeable).
"""
from __future__ import annotations

from pathlib import Path

from .errors import ConfigError

# keys accepted in a manifest / config file
KNOWN_KEYS = {
    # dataset
    'data', 'label', 'subject', 'na',
    # forest
    'n-trees', 'mtry', 'min-node-size', 'max-depth', 'importance',
    # schemes
    'scheme', 'schemes', 'k', 'test-fraction',
    # trials
    'seed', 'max-trials', 'top-k', 'early-stop-window', 'with-trials', 'counts',
    # benchmark
    'sizes', 'benchmark-trials',
    # output
    'out', 'title',
}


def normalize_key(key: str) -> str:
    return key.strip().lower().replace('_', '-')


def parse_kv_file(path) -> dict[str, str]:
    """
    Input: path of a key-value file
    Returns a dict of normalized keys to raw string values, later lines win
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as error:
        raise ConfigError(f"cannot read configuration file {path}: {error}") from None
    values = {}
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        if '=' not in stripped:
            raise ConfigError(f"{path}:{number}: expected 'key = value', got {stripped!r}")
        key, value = stripped.split('=', 1)
        # ordinal.<column> keys keep the column's case
        key = key.strip()
        key = 'ordinal.' + key.split('.', 1)[1].strip() if key.lower().startswith('ordinal.') else normalize_key(key)
        if key not in KNOWN_KEYS and not key.startswith('ordinal.'):
            raise ConfigError(f"{path}:{number}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigError(f"invalid boolean {text!r}")
