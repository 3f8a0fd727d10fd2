"""Reading inputs and writing reports.

All reports carry ``"schema": "derham/1"`` and are written with sorted keys so
that identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .metric_core import FiniteMetricSpace, StructuralError

SCHEMA = "derham/1"


class InputError(ValueError):
    """Malformed input; the message names the first offending field."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def metric_from_dict(data: dict) -> FiniteMetricSpace:
    if not isinstance(data, dict):
        raise InputError("metric input must be a JSON object")
    if "space" in data and isinstance(data["space"], dict):
        data = data["space"]
    if "dist" not in data:
        raise InputError("metric input is missing field 'dist'")
    try:
        dist = np.asarray(data["dist"], dtype=float)
    except (TypeError, ValueError):
        raise InputError("field 'dist' is not a numeric matrix") from None
    labels = data.get("labels") or [str(i) for i in range(len(dist))]
    try:
        return FiniteMetricSpace(labels, dist)
    except StructuralError as exc:
        raise InputError(f"field 'dist': {exc}") from None


def metric_to_dict(space: FiniteMetricSpace) -> dict:
    return {"labels": list(space.labels), "dist": space.dist.tolist()}


def read_metric_csv(path) -> FiniteMetricSpace:
    """Square matrix; a first row of non-numeric cells is taken as labels."""
    try:
        rows = [r for r in csv.reader(Path(path).read_text().splitlines()) if r]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    labels = None
    try:
        [float(x) for x in rows[0]]
    except ValueError:
        labels, rows = [x.strip() for x in rows[0]], rows[1:]
    try:
        dist = np.array([[float(x) for x in r] for r in rows])
    except ValueError:
        raise InputError(f"{path}: non-numeric distance entry") from None
    return metric_from_dict({"labels": labels, "dist": dist.tolist()})


def read_metric(path) -> FiniteMetricSpace:
    if str(path).lower().endswith(".csv"):
        return read_metric_csv(path)
    return metric_from_dict(read_json(path))


def to_csv(report: dict) -> str:
    """Flatten a report into ``key,value`` rows (nested keys joined by dots)."""
    out = _io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["key", "value"])

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k in sorted(obj):
                walk(f"{prefix}.{k}" if prefix else str(k), obj[k])
        elif isinstance(obj, list) and obj and all(isinstance(v, (dict, list)) for v in obj):
            for i, v in enumerate(obj):
                walk(f"{prefix}.{i}", v)
        else:
            w.writerow([prefix, json.dumps(obj) if isinstance(obj, list) else obj])

    walk("", _jsonable(report))
    return out.getvalue()


def write_report(report: dict, path=None, fmt: str = "json") -> str:
    text = to_csv(report) if fmt == "csv" else dumps(report)
    if path:
        Path(path).write_text(text)
    return text
