"""
This file contains the writers of the output files: JSON reports (sorted keys, indent 4), CSV tables,
SVG documents, and the error log left behind by a failed command
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .constants import ERROR_FILE
from .utils import ensure_dir

logger = logging.getLogger(__name__)

SCHEMA_DIR = Path(__file__).resolve().parent.parent / 'schemas'
TIMING_FIELD = 'wall_time_ms'


def _plain(value):
    # numpy scalars and arrays reach the reports through the dataclasses' to_dict
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps(document) -> str:
    return json.dumps(document, indent=4, sort_keys=True, default=_plain) + "\n"


def write_json(document, path) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    path.write_text(dumps(document), encoding='utf-8')
    logger.debug("wrote %s", path)
    return path


def write_table(rows: Sequence[Mapping], path, columns: Optional[Sequence[str]] = None) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    frame = pd.DataFrame(list(rows), columns=list(columns) if columns is not None else None)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def write_text(text: str, path) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    path.write_text(text, encoding='utf-8')
    logger.debug("wrote %s", path)
    return path


def mask_timing(document):
    """Copy of a report with every wall_time_ms value replaced by 0, the only field allowed to differ across reruns."""
    if isinstance(document, Mapping):
        return {key: (0 if key == TIMING_FIELD else mask_timing(value)) for key, value in document.items()}
    if isinstance(document, list):
        return [mask_timing(value) for value in document]
    return document


def error_document(command: str, error: BaseException, completed: Iterable = ()) -> dict:
    return {
        'command': command,
        'error_type': type(error).__name__,
        'message': str(error),
        'completed': list(completed),
    }


def write_error(out_dir, command: str, error: BaseException, completed: Iterable = ()) -> Optional[Path]:
    """Writes error.json to out_dir; returns None when the directory itself cannot be written."""
    try:
        return write_json(error_document(command, error, completed), Path(out_dir) / ERROR_FILE)
    except OSError as os_error:
        logger.error("cannot write the error log to %s: %s", out_dir, os_error)
        return None


def load_schema(name: str) -> dict:
    with open(SCHEMA_DIR / name, encoding='utf-8') as file:
        return json.load(file)
