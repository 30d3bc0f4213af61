"""CSV ingestion for return series and covariance matrices.

Returns files carry a header ``date,<asset1>,<asset2>,...`` followed by one
row per period with an ISO-8601 date and fractional returns. Covariance
files are headerless n x n numeric grids. UTF-8 with LF or CRLF endings.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .covariance import ReturnSample
from .errors import DataFormatError, SevenSinsError
from .linalg import SymmetricMatrix


@dataclass(frozen=True)
class ReturnSeries:
    dates: list[str]
    assets: list[str]
    sample: ReturnSample


def _rows(text: str) -> list[list[str]]:
    return [row for row in csv.reader(io.StringIO(text)) if row and any(cell.strip() for cell in row)]


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"{path}: not valid UTF-8") from exc


def _float(cell: str, where: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataFormatError(f"{where}: {cell!r} is not a number") from None
    if not np.isfinite(value):
        raise DataFormatError(f"{where}: non-finite value {cell!r}")
    return value


def parse_returns(text: str, source: str = "<returns>") -> ReturnSeries:
    rows = _rows(text)
    if not rows:
        raise DataFormatError(f"{source}: empty file")
    header = [cell.strip() for cell in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise DataFormatError(f"{source}: header must be 'date,<asset>,...'")
    assets = header[1:]
    dates, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataFormatError(f"{source}:{lineno}: expected {len(header)} fields, got {len(row)}")
        date = row[0].strip()
        try:
            dt.date.fromisoformat(date)
        except ValueError:
            raise DataFormatError(f"{source}:{lineno}: {date!r} is not an ISO-8601 date") from None
        dates.append(date)
        values.append([_float(cell, f"{source}:{lineno}") for cell in row[1:]])
    if not values:
        raise DataFormatError(f"{source}: no data rows")
    return ReturnSeries(dates, assets, ReturnSample(np.array(values)))


def parse_covariance(text: str, source: str = "<covariance>") -> SymmetricMatrix:
    rows = _rows(text)
    if not rows:
        raise DataFormatError(f"{source}: empty file")
    grid = [[_float(cell, f"{source}:{i + 1}") for cell in row] for i, row in enumerate(rows)]
    n = len(grid)
    if any(len(row) != n for row in grid):
        raise DataFormatError(f"{source}: covariance must be a square {n}x{n} grid")
    try:
        return SymmetricMatrix(np.array(grid))
    except SevenSinsError as exc:
        raise DataFormatError(f"{source}: {exc}") from exc


def read_returns(path) -> ReturnSeries:
    return parse_returns(_read_text(path), str(path))


def read_covariance(path) -> SymmetricMatrix:
    return parse_covariance(_read_text(path), str(path))


def format_returns(series: ReturnSeries) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date", *series.assets])
    for date, row in zip(series.dates, series.sample.values):
        writer.writerow([date, *(repr(float(v)) for v in row)])
    return out.getvalue()


def parse_vector(text: str, n: int | None = None, name: str = "vector") -> np.ndarray:
    """Parse ``"1,2,3"``; a single value is broadcast to length ``n``."""
    try:
        values = np.array([float(part) for part in text.split(",") if part.strip()])
    except ValueError:
        raise DataFormatError(f"{name}: {text!r} is not a comma-separated list of numbers") from None
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise DataFormatError(f"{name}: {text!r} is not a list of finite numbers")
    if n is not None:
        if values.size == 1:
            values = np.full(n, values[0])
        elif values.size != n:
            raise DataFormatError(f"{name}: expected {n} values, got {values.size}")
    return values
