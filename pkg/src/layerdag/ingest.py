"""Cumulative case-count tables turned into smoothed daily shares per region."""
from __future__ import annotations

import csv
import datetime as dt
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataFormatError, EmptyResultError, InvalidParameterError
from .sem_model import Dataset

__all__ = ["TimeSeriesTable", "IngestWarning", "read_csse", "ingest_timeseries", "parse_date"]

# leading columns of the CSSE global time-series file
_CSSE_PREFIX = ("Province/State", "Country/Region", "Lat", "Long")


class IngestWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeriesTable:
    """Cumulative counts: ``values[d, r]`` for date ``dates[d]`` and region ``regions[r]``."""

    dates: tuple
    regions: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        dates, regions = tuple(self.dates), tuple(self.regions)
        if values.shape != (len(dates), len(regions)):
            raise InvalidParameterError(
                f"values have shape {values.shape} for {len(dates)} dates x {len(regions)} regions")
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise InvalidParameterError("dates must be strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidParameterError("cumulative counts must be finite and nonnegative")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "values", values)


def parse_date(text: str) -> dt.date:
    """ISO ``YYYY-MM-DD`` or the CSSE ``M/D/YY`` form."""
    text = text.strip()
    for fmt in ("%Y-%m-%d", "%m/%d/%y", "%m/%d/%Y"):
        try:
            return dt.datetime.strptime(text, fmt).date()
        except ValueError:
            pass
    raise InvalidParameterError(f"unrecognised date {text!r}")


def read_csse(path) -> TimeSeriesTable:
    """Read the CSSE global confirmed-cases file, summing provinces per country."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8-sig") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if tuple(header[:4]) != _CSSE_PREFIX:
        raise DataFormatError(f"{path}: expected leading columns {', '.join(_CSSE_PREFIX)}")
    try:
        dates = [parse_date(h) for h in header[4:]]
    except InvalidParameterError as exc:
        raise DataFormatError(f"{path}: header: {exc}") from None
    totals: dict[str, np.ndarray] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataFormatError(f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}")
        try:
            counts = np.array([float(v) if v.strip() else 0.0 for v in row[4:]])
        except ValueError as exc:
            raise DataFormatError(f"{path}: line {lineno}: {exc}") from None
        country = row[1].strip()
        totals[country] = totals.get(country, 0.0) + counts
    regions = sorted(totals)
    values = np.column_stack([totals[r] for r in regions]) if regions else np.zeros((len(dates), 0))
    return TimeSeriesTable(tuple(dates), tuple(regions), values)


def _daily(table: TimeSeriesTable) -> np.ndarray:
    cum = table.values
    daily = np.diff(cum, axis=0, prepend=0.0)
    for d, r in zip(*np.nonzero(daily < 0)):
        warnings.warn(f"cumulative count for {table.regions[r]} drops on {table.dates[d]}; "
                      f"daily count {daily[d, r]:g} clamped to 0", IngestWarning, stacklevel=3)
    return np.maximum(daily, 0.0)


def _trailing_mean(a: np.ndarray, k: int) -> np.ndarray:
    c = np.cumsum(a, axis=0)
    out = c.copy()
    out[k:] = c[k:] - c[:-k]
    width = np.minimum(np.arange(1, a.shape[0] + 1), k)
    return out / width[:, None]


def ingest_timeseries(table: TimeSeriesTable, start, end, gap_days: int = 10,
                      ma_days: int = 3) -> Dataset:
    """Daily shares per region over ``[start, end]``, smoothed by a trailing mean.

    Steps: first differences of the cumulative counts (the first date of the
    table counts as its own daily value; drops are clamped to 0 with a
    warning), restriction to the window, removal of regions with more than
    ``gap_days`` zero days in the window, division by the day's total over
    the kept regions, and a trailing ``ma_days`` moving average that is
    shorter at the start of the window.
    """
    start = parse_date(start) if isinstance(start, str) else start
    end = parse_date(end) if isinstance(end, str) else end
    if gap_days < 0:
        raise InvalidParameterError(f"gap_days must be >= 0, got {gap_days}")
    if ma_days < 1:
        raise InvalidParameterError(f"ma_days must be >= 1, got {ma_days}")
    if not table.dates or start > end or start < table.dates[0] or end > table.dates[-1]:
        raise InvalidParameterError(f"window {start}..{end} is not inside the table's dates")
    daily = _daily(table)
    rows = [i for i, d in enumerate(table.dates) if start <= d <= end]
    daily = daily[rows]
    keep = np.count_nonzero(daily == 0, axis=0) <= gap_days
    if not keep.any():
        raise EmptyResultError(f"no region has at most {gap_days} zero days in {start}..{end}")
    daily = daily[:, keep]
    total = daily.sum(axis=1, keepdims=True)
    shares = np.divide(daily, total, out=np.zeros_like(daily), where=total > 0)
    labels = tuple(r for r, k in zip(table.regions, keep) if k)
    return Dataset(_trailing_mean(shares, ma_days), labels)
