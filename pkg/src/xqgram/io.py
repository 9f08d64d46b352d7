"""CSV ingestion and atomic output writing."""

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import DataError, LengthMismatch, MissingColumn, NonNumericCell


def ingest_csv(path, columns):
    """Read the named numeric columns of a headed CSV file.

    Returns ``{name: float64 array}`` with all arrays the same length.  Row
    numbers in errors are file line numbers (the header is line 1).  Missing
    values are rejected, never imputed.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file {str(path)!r} does not exist")
    columns = list(dict.fromkeys(columns))
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        pos = {}
        for name in columns:
            if name not in header:
                raise MissingColumn(name, header)
            pos[name] = header.index(name)
        data = {name: [] for name in columns}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise LengthMismatch(f"line {line_no} has {len(row)} fields, header has {len(header)}")
            for name in columns:
                cell = row[pos[name]].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericCell(line_no, name, cell) from None
                if not math.isfinite(v):
                    raise NonNumericCell(line_no, name, cell)
                data[name].append(v)
    return {name: np.asarray(vals, dtype=np.float64) for name, vals in data.items()}


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def records_to_csv(records, fields):
    lines = [",".join(fields)]
    for rec in records:
        lines.append(",".join(_cell(rec.get(f)) for f in fields))
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def records_to_json(records, fields):
    rows = [{f: _jsonable(rec.get(f)) for f in fields} for rec in records]
    return json.dumps(rows, indent=1, sort_keys=False) + "\n"


def write_records(path, records, fields, fmt="csv"):
    text = records_to_csv(records, fields) if fmt == "csv" else records_to_json(records, fields)
    atomic_write_text(path, text)
    return Path(path)


def read_records_csv(path):
    """Parse a file written by :func:`write_records`; numeric cells become floats."""
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for k, v in row.items():
                if v in ("true", "false"):
                    rec[k] = v == "true"
                    continue
                try:
                    rec[k] = float(v)
                except ValueError:
                    rec[k] = v
            out.append(rec)
    return out
