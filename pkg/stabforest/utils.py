"""
This file contains small helpers shared by the command line, the validation schemes and the benchmark
"""
from __future__ import annotations

import os
import time
from pathlib import Path

from .constants import SEED_MAX, THREADS_ENV
from .errors import ConfigError


def parse_seed(text) -> int:
    """
    Input: a seed as an int, a decimal string or a 0x-prefixed hex string
    Returns the seed as an unsigned 64 bit integer
    """
    if isinstance(text, int):
        value = text
    else:
        raw = str(text).strip().lower()
        try:
            value = int(raw, 16) if raw.startswith('0x') else int(raw, 10)
        except ValueError:
            raise ConfigError(f"invalid seed {text!r}") from None
    if value < 0 or value > SEED_MAX:
        raise ConfigError(f"seed {text!r} is outside the unsigned 64 bit range")
    return value


def parse_int_list(text) -> list[int]:
    """Parses '250,500, 2000' (or an iterable of ints) into a list of ints."""
    if isinstance(text, (list, tuple)):
        return [int(value) for value in text]
    try:
        return [int(part) for part in str(text).split(',') if part.strip()]
    except ValueError:
        raise ConfigError(f"invalid integer list {text!r}") from None


def worker_count() -> int:
    """
    Number of joblib workers: the value of STABFOREST_THREADS, or -1 (all cores) when unset
    """
    raw = os.environ.get(THREADS_ENV, '').strip()
    if not raw:
        return -1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


class Stopwatch:
    """Wall clock timer reporting milliseconds, used as a context manager."""

    def __init__(self):
        self.start = None
        self.elapsed_ms = 0.0

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed_ms = (time.perf_counter() - self.start) * 1000.0
        return False
