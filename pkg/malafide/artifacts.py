"""Atomic writers for the files a run directory holds."""

import json
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd


def atomic_write_text(path: Path, text: str) -> Path:
    """
    Write text to a temporary file beside `path`, then rename it into place.

    Args:
        path (Path): Destination file. Parent directories are created.
        text (str): Content to write.

    Returns:
        Path: The destination path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialise {type(value).__name__} to JSON")


_FLOAT_TOKEN = re.compile(r'"\\u0000(\d+)"')


def _tag_floats(value: Any, digits: int, literals: list[str]) -> Any:
    if isinstance(value, np.ndarray):
        value = value.tolist()
    elif isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and math.isfinite(value):
        literals.append(format(value, f"#.{digits}g"))
        return f"\0{len(literals) - 1}"
    if isinstance(value, dict):
        return {k: _tag_floats(v, digits, literals) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_tag_floats(v, digits, literals) for v in value]
    return value


def write_json(path: Path, payload: Any, float_digits: int | None = None) -> Path:
    """
    Serialise `payload` as JSON with sorted keys.

    By default floats use Python's shortest round-trip repr. With `float_digits`
    every finite float is written with exactly that many significant digits
    (17 is bit-exact for doubles). NumPy scalars and arrays are converted first.
    """
    if float_digits is None:
        text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    else:
        literals: list[str] = []
        tagged = _tag_floats(payload, float_digits, literals)
        text = json.dumps(tagged, indent=2, sort_keys=True, default=_json_default)
        text = _FLOAT_TOKEN.sub(lambda m: literals[int(m.group(1))], text)
    return atomic_write_text(path, text + "\n")


def read_json(path: Path) -> Any:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File {path} does not exist.")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path: Path, df: pd.DataFrame) -> Path:
    return atomic_write_text(path, df.to_csv(index=False, lineterminator="\n"))
