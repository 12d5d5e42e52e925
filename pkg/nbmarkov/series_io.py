import os
import re
from typing import Dict, Mapping

import numpy as np
import pandas as pd

from nbmarkov.errors import SeriesFormatError
from nbmarkov.process import ModelParams
from nbmarkov.simulate import TimeSeries

SERIES_COLUMNS = ["time", "count"]
_FIELD_COUNT = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


def ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def read_series(path: str) -> TimeSeries:
    """Read a ``time,count`` CSV; errors carry the 1-based file line, blank lines included."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Series file not found: {path}")
    try:
        df = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise SeriesFormatError("file is empty, expected header time,count", line=1)
    except pd.errors.ParserError as e:
        found = _FIELD_COUNT.search(str(e))
        if found is None:
            raise SeriesFormatError(str(e).strip()) from e
        expected, line, saw = (int(g) for g in found.groups())
        raise SeriesFormatError(f"expected {expected} fields, saw {saw}", line=line) from e
    header = ["" if pd.isna(v) else str(v).strip() for v in df.iloc[0]]
    if header != SERIES_COLUMNS:
        raise SeriesFormatError(f"expected header time,count, got {','.join(header)}", line=1)

    times, counts = [], []
    for index, t_raw, c_raw in df.iloc[1:].itertuples(index=True, name=None):
        line = index + 1
        if pd.isna(t_raw) and pd.isna(c_raw):
            continue
        if pd.isna(t_raw) or pd.isna(c_raw):
            raise SeriesFormatError("missing value", line=line)
        try:
            t = float(t_raw)
        except ValueError:
            raise SeriesFormatError(f"time {t_raw!r} is not a number", line=line)
        try:
            c = float(c_raw)
        except ValueError:
            raise SeriesFormatError(f"count {c_raw!r} is not a number", line=line)
        if not np.isfinite(t):
            raise SeriesFormatError(f"time {t_raw!r} is not finite", line=line)
        if c < 0 or not c.is_integer():
            raise SeriesFormatError(f"count {c_raw!r} must be a non-negative integer", line=line)
        if times and t <= times[-1]:
            raise SeriesFormatError(f"time {t_raw} does not increase on {times[-1]:g}", line=line)
        times.append(t)
        counts.append(int(c))
    if not times:
        raise SeriesFormatError("no observations after the header", line=2)
    return TimeSeries(np.asarray(times), np.asarray(counts, dtype=np.int64))


def write_series(series: TimeSeries, path: str) -> str:
    ensure_parent(path)
    series.to_frame().to_csv(path, index=False)
    return path


def format_result(values: Mapping[str, object]) -> str:
    return "".join(f"{key} = {value!r}\n" if isinstance(value, float) else f"{key} = {value}\n"
                   for key, value in values.items())


def write_result(values: Mapping[str, object], path: str) -> str:
    """Flat ``key = value`` text, one entry per line."""
    ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_result(values))
    return path


def read_result(path: str) -> Dict[str, str]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Result file not found: {path}")
    out: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SeriesFormatError(f"expected 'key = value', got {line!r}", line=line_no)
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def params_from_result(values: Mapping[str, str]) -> ModelParams:
    try:
        return ModelParams(r=float(values["r_hat"]), q=float(values["q_hat"]), c=float(values["c_hat"]))
    except KeyError as e:
        raise SeriesFormatError(f"result file lacks {e.args[0]}")
