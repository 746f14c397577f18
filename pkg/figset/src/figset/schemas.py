"""Parsing of the documented result-CSV layouts.

Every table may open with ``#``-prefixed comment lines (run provenance).
A mismatch raises SchemaError naming the offending column.
"""

import csv

__all__ = ["SchemaError", "read_accuracy", "read_sigmoids", "read_heatmap",
           "read_encoder"]


class SchemaError(ValueError):
    """Input file does not match the documented CSV layout."""


def _read_table(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: empty table")
    return rows[0], rows[1:]


def _parse(path, header, row, column, kind):
    try:
        value = row[header.index(column)]
    except (ValueError, IndexError):
        raise SchemaError(f"{path}: missing column '{column}'") from None
    try:
        return kind(value)
    except ValueError:
        raise SchemaError(
            f"{path}: bad value {value!r} in column '{column}'") from None


def _optional_float(text):
    return None if text == "never" else float(text)


def read_accuracy(path):
    """Rows of accuracy.csv: list of dicts with keys
    cell, trial, q, provenance, accuracy."""
    header, body = _read_table(path)
    out = []
    for row in body:
        out.append({
            "cell": _parse(path, header, row, "cell", str),
            "trial": _parse(path, header, row, "trial", int),
            "q": _parse(path, header, row, "q", int),
            "provenance": _parse(path, header, row, "provenance", str),
            "accuracy": _parse(path, header, row, "accuracy", float),
        })
    if not out:
        raise SchemaError(f"{path}: no data rows")
    return out


def read_sigmoids(path):
    """Rows of sigmoids.csv: cell, c1, c2, c3, q75 (None for 'never'),
    residual."""
    header, body = _read_table(path)
    out = []
    for row in body:
        out.append({
            "cell": _parse(path, header, row, "cell", str),
            "c1": _parse(path, header, row, "c1", float),
            "c2": _parse(path, header, row, "c2", float),
            "c3": _parse(path, header, row, "c3", float),
            "q75": _parse(path, header, row, "q75", _optional_float),
            "residual": _parse(path, header, row, "residual", float),
        })
    if not out:
        raise SchemaError(f"{path}: no data rows")
    return out


def read_heatmap(path):
    """Rows of heatmap.csv: cell, q, x, y, frequency (x, y in mm)."""
    header, body = _read_table(path)
    out = []
    for row in body:
        out.append({
            "cell": _parse(path, header, row, "cell", str),
            "q": _parse(path, header, row, "q", int),
            "x": _parse(path, header, row, "x", float),
            "y": _parse(path, header, row, "y", float),
            "frequency": _parse(path, header, row, "frequency", float),
        })
    if not out:
        raise SchemaError(f"{path}: no data rows")
    return out


def read_encoder(path):
    """Encoder-sweep grid: two parameter columns followed by q75.

    Returns (param_names, rows) where rows have keys a, b, q75."""
    header, body = _read_table(path)
    if len(header) != 3 or header[2] != "q75":
        raise SchemaError(f"{path}: missing column 'q75'")
    out = []
    for row in body:
        out.append({
            "a": _parse(path, header, row, header[0], float),
            "b": _parse(path, header, row, header[1], float),
            "q75": _parse(path, header, row, "q75", _optional_float),
        })
    if not out:
        raise SchemaError(f"{path}: no data rows")
    return (header[0], header[1]), out
