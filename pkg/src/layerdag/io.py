"""CSV and JSON readers/writers for datasets, models and learned graphs."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import DataFormatError
from .learner import LearnedDag
from .precision import PrecisionEstimate
from .sem_model import Dataset, SemModel

__all__ = [
    "read_dataset",
    "write_dataset",
    "read_json",
    "write_json",
    "read_model",
    "write_model",
    "read_learned",
    "write_learned",
    "write_edge_list",
    "write_precision",
]


def read_dataset(path) -> Dataset:
    """Numeric CSV with a header row; one column per node."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    except (UnicodeDecodeError, csv.Error) as exc:
        raise DataFormatError(f"{path}: not a CSV file ({exc})") from exc
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise DataFormatError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    p = len(header)
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != p:
            raise DataFormatError(f"{path}: line {lineno} has {len(row)} fields, header has {p}")
        parsed = []
        for col, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {lineno}, column {col + 1} ({header[col]!r}): "
                    f"not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise DataFormatError(
                    f"{path}: line {lineno}, column {col + 1} ({header[col]!r}): non-finite value")
            parsed.append(v)
        values.append(parsed)
    X = np.array(values, dtype=float).reshape(len(values), p)
    return Dataset(X, tuple(header))


def write_dataset(data: Dataset, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.labels)
        for row in data.X:
            w.writerow([repr(float(v)) for v in row])


def read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc


def write_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _load(path, cls):
    d = read_json(path)
    try:
        return cls.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: not a valid {cls.__name__} document ({exc})") from exc


def read_model(path) -> SemModel:
    return _load(path, SemModel)


def write_model(model: SemModel, path) -> None:
    write_json(model.to_dict(), path)


def read_learned(path) -> LearnedDag:
    return _load(path, LearnedDag)


def write_learned(learned: LearnedDag, path) -> None:
    write_json(learned.to_dict(), path)


def write_precision(est: PrecisionEstimate, path) -> None:
    write_json(est.to_dict(), path)


def write_edge_list(learned: LearnedDag, path) -> None:
    """``parent,child,weight`` rows named by column label when available."""
    names = list(learned.labels) if learned.labels else [str(k) for k in range(learned.p)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parent", "child", "weight"])
        for j, k, beta in learned.edges():
            w.writerow([names[j], names[k], repr(beta)])
